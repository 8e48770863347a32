"""Keep numerical work single-threaded: these model sizes lose to BLAS
thread overhead, and it keeps run-to-run timings comparable."""

import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
