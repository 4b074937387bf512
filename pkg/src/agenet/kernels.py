"""Hot numerical kernels with backend selection at import time.

The compiled extension (``agenet._kernels``) is used when it was built;
otherwise the numpy fallback is imported. Setting ``AGENET_PURE_PYTHON=1``
forces the fallback.
"""
import os

if os.environ.get("AGENET_PURE_PYTHON", "") not in ("", "0"):
    from agenet._kernels_py import gaussian_log_prob, logsumexp_rows, mutual_information_codes
    BACKEND = "python"
else:
    try:
        from agenet._kernels import gaussian_log_prob, logsumexp_rows, mutual_information_codes
        BACKEND = "cython"
    except ImportError:
        from agenet._kernels_py import gaussian_log_prob, logsumexp_rows, mutual_information_codes
        BACKEND = "python"

__all__ = ["BACKEND", "gaussian_log_prob", "logsumexp_rows", "mutual_information_codes"]
