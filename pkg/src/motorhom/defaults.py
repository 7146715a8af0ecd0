"""Central table of numerical defaults.

=====================  ========  ===============================================
name                   value     used by
=====================  ========  ===============================================
CELL_GRID              128       cell solver grid points per unit cell and axis
CELLS_PER_PERIOD       64        simulator cells per epsilon-period
EIG_TOL                1e-11     eigenvalue convergence (successive estimates)
EIG_MAX_ITER           10000     eigen iteration cap
ENVELOPE_A             2.0       decay rate of the initial bumps
FINAL_TIME             1.0       simulated horizon
CFL_TARGET             0.45      default dt is chosen at this upwind CFL number
CFL_MAX                0.9       hard upwind CFL limit
LEGENDRE_TOL           1e-8      |q - DH(p)| stopping threshold
LEGENDRE_P_CAP         50.0      bracket expansion cap for the conjugate search
SNAPSHOTS              40        snapshots recorded over a run by default
=====================  ========  ===============================================
"""

CELL_GRID = 128
CELLS_PER_PERIOD = 64
EIG_TOL = 1e-11
EIG_MAX_ITER = 10_000
ENVELOPE_A = 2.0
FINAL_TIME = 1.0
CFL_TARGET = 0.45
CFL_MAX = 0.9
LEGENDRE_TOL = 1e-8
LEGENDRE_P_CAP = 50.0
SNAPSHOTS = 40

OUTPUT_ROOT_ENV = "MOTORHOM_OUTPUT_ROOT"
