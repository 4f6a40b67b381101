"""
Numeriske toleranser og standardverdier for DosVokter
"""
import os

# Breakpoint-sammenligninger og drift-sjekker
TOL = 1e-12

# Relativ toleranse for Lyapunov-revisjonen
LYAPUNOV_RTOL = 1e-9

# Cyclic Jacobi: konvergert når alle off-diagonaler er under denne
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

# Matriseeksponential (scaling and squaring med Taylor-kjerne)
EXPM_TOL = 1e-12
EXPM_MAX_TERMS = 40

DEFAULT_INTEGRATOR_STEP = 1e-3
DEFAULT_SETTLE_THRESHOLD = 1e-3
DEFAULT_ORACLE_HORIZON = 100.0

# Andel av hendelsene (fra slutten) som brukes i decay-fit
DECAY_FIT_TAIL = 0.5

# Øvre grense for parametriske generatorer
GENERATOR_MAX_EVENTS = 1_000_000

# Initialtilstander trekkes uniformt fra dette intervallet
INITIAL_STATE_RANGE = (-10.0, 10.0)

RNG_NAME = "PCG64"

OUTPUT_KINDS = ("estimates", "trace", "summary", "plotdata")
DEFAULT_OUT_DIR = os.getenv("DOSVOKTER_OUT_DIR", "out")
CORPUS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus")
