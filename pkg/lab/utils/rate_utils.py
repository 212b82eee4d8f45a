import math
from typing import List, Optional, Sequence


def inter_level_rates(h_list: Sequence[float], err_list: Sequence[float]) -> List[Optional[float]]:
    """rate_k = log(e_{k-1}/e_k) / log(h_{k-1}/h_k); None for the first level."""
    if len(h_list) != len(err_list):
        raise ValueError("Step and error lists must have the same length")
    rates: List[Optional[float]] = [None] * min(1, len(h_list))
    for k in range(1, len(h_list)):
        e_prev, e_cur = err_list[k - 1], err_list[k]
        h_prev, h_cur = h_list[k - 1], h_list[k]
        if e_prev > 0.0 and e_cur > 0.0 and h_prev != h_cur:
            rates.append(math.log(e_prev / e_cur) / math.log(h_prev / h_cur))
        else:
            rates.append(None)
    return rates


def format_float(value: Optional[float], digits: int = 17) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}g}"


def format_sci(value: Optional[float], digits: int = 3) -> str:
    if value is None:
        return "---"
    if value == 0.0:
        return "0"
    return f"{value:.{digits}e}"


def format_rate(value: Optional[float]) -> str:
    return "---" if value is None else f"{value:.2f}"
