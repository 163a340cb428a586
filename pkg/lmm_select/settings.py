"""
Runtime settings for lmm_select.

Values come from the environment or a .env file (python-decouple) and only
supply defaults; library calls always take explicit config objects.
"""

from decouple import config

# Worker pool (benchmark replications, no-warm-start paths)
THREADS = config('LMM_SELECT_THREADS', default=1, cast=int)

LOG_LEVEL = config('LMM_SELECT_LOG_LEVEL', default='INFO')
LOG_FORMAT = '%(levelname)s - %(name)s - %(message)s'


# Adaptive ridge defaults
DELTA = config('LMM_SELECT_DELTA', default=1e-5, cast=float)
OUTER_TOL = config('LMM_SELECT_OUTER_TOL', default=1e-5, cast=float)
MAX_OUTER_ITERS = config('LMM_SELECT_MAX_OUTER_ITERS', default=100, cast=int)
SELECTION_THRESHOLD = config('LMM_SELECT_THRESHOLD', default=0.5, cast=float)


# Inner optimizer defaults
MAX_ITERS = config('LMM_SELECT_MAX_ITERS', default=500, cast=int)
GRAD_TOL = config('LMM_SELECT_GRAD_TOL', default=1e-6, cast=float)
STEP_TOL = config('LMM_SELECT_STEP_TOL', default=1e-10, cast=float)
FD_STEP = config('LMM_SELECT_FD_STEP', default=1e-6, cast=float)


# Regularization grid defaults
LAMBDA_MIN = 1e-2
LAMBDA_MAX = 1e2
LAMBDA_COUNT = 100
