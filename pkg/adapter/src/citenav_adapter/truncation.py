"""Joint truncation of a (query, candidate) token-id pair.

Same rule the engine applies to analyzer tokens, here in model-token
space: while the total exceeds the budget, drop one id from the end of
the currently longer sequence, candidate first on ties. Callers
subtract the special-token overhead from the budget before calling.
"""


def truncate_model_tokens(q_ids, c_ids, max_total: int):
    if max_total < 2:
        raise ValueError("max_total must be >= 2")
    q_ids, c_ids = list(q_ids), list(c_ids)
    while len(q_ids) + len(c_ids) > max_total:
        if len(c_ids) >= len(q_ids):
            c_ids.pop()
        else:
            q_ids.pop()
    return q_ids, c_ids
