# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Strang-splitting time stepper.

One step is: half reaction, upwind drift, implicit diffusion, half reaction.  The
diffusion solve uses a precomputed LU factorization of the cyclic tridiagonal
M-matrix ``I - r*lap`` without pivoting; every substitution adds nonnegative terms,
so nonnegative data stays nonnegative.  The new values are then written as the old
ones plus telescoping diffusive fluxes, which keeps the mass exact to rounding.
"""


cdef inline void _react(double[::1] n1, double[::1] n2, double[::1] c11, double[::1] c12,
                        double[::1] c21, double[::1] c22, Py_ssize_t J) noexcept nogil:
    cdef Py_ssize_t j
    cdef double a, b
    for j in range(J):
        a = n1[j]
        b = n2[j]
        n1[j] = c11[j] * a + c12[j] * b
        n2[j] = c21[j] * a + c22[j] * b


cdef inline void _upwind(double[::1] n, double[::1] ap, double[::1] am, double[::1] flux,
                         Py_ssize_t J) noexcept nogil:
    # flux[j] lives on the face between cells j and j+1 (already scaled by dt/h)
    cdef Py_ssize_t j
    for j in range(J - 1):
        flux[j] = ap[j] * n[j] + am[j] * n[j + 1]
    flux[J - 1] = ap[J - 1] * n[J - 1] + am[J - 1] * n[0]
    n[0] = n[0] - (flux[0] - flux[J - 1])
    for j in range(1, J):
        n[j] = n[j] - (flux[j] - flux[j - 1])


cdef inline void _cyclic_solve(double[::1] x, double[::1] lower, double[::1] inv_beta,
                               double[::1] gamma, double[::1] side, double[::1] last,
                               double last_diag, Py_ssize_t J) noexcept nogil:
    cdef Py_ssize_t i
    cdef Py_ssize_t n = J - 1
    cdef double acc, xl
    # forward substitution on the body rows, then eliminate the last row
    for i in range(1, n):
        x[i] = x[i] - lower[i - 1] * x[i - 1]
    acc = x[n]
    for i in range(n):
        acc = acc - last[i] * x[i]
    xl = acc / last_diag
    x[n] = xl
    x[n - 1] = (x[n - 1] - side[n - 1] * xl) * inv_beta[n - 1]
    i = n - 2
    while i >= 0:
        x[i] = (x[i] - gamma[i] * x[i + 1] - side[i] * xl) * inv_beta[i]
        i -= 1


cdef inline void _cyclic_solve2(double[::1] x, double[::1] y, double[::1] lower,
                                double[::1] inv_beta, double[::1] gamma, double[::1] side,
                                double[::1] last, double last_diag, Py_ssize_t J) noexcept nogil:
    # two right-hand sides at once: independent recurrences overlap in the pipeline
    cdef Py_ssize_t i
    cdef Py_ssize_t n = J - 1
    cdef double ax, ay, xl, yl, l
    for i in range(1, n):
        l = lower[i - 1]
        x[i] = x[i] - l * x[i - 1]
        y[i] = y[i] - l * y[i - 1]
    ax = x[n]
    ay = y[n]
    for i in range(n):
        ax = ax - last[i] * x[i]
        ay = ay - last[i] * y[i]
    xl = ax / last_diag
    yl = ay / last_diag
    x[n] = xl
    y[n] = yl
    x[n - 1] = (x[n - 1] - side[n - 1] * xl) * inv_beta[n - 1]
    y[n - 1] = (y[n - 1] - side[n - 1] * yl) * inv_beta[n - 1]
    i = n - 2
    while i >= 0:
        x[i] = (x[i] - gamma[i] * x[i + 1] - side[i] * xl) * inv_beta[i]
        y[i] = (y[i] - gamma[i] * y[i + 1] - side[i] * yl) * inv_beta[i]
        i -= 1


cdef inline void _flux_update(double[::1] n, double[::1] x, double r, Py_ssize_t J) noexcept nogil:
    # write the implicit step as telescoping fluxes so mass does not depend on the solve
    cdef Py_ssize_t j
    n[0] = n[0] + r * ((x[1] - x[0]) - (x[0] - x[J - 1]))
    for j in range(1, J - 1):
        n[j] = n[j] + r * ((x[j + 1] - x[j]) - (x[j] - x[j - 1]))
    n[J - 1] = n[J - 1] + r * ((x[0] - x[J - 1]) - (x[J - 1] - x[J - 2]))


cdef inline void _diffuse(double[::1] n1, double[::1] n2, double[::1] x, double[::1] y, double r,
                          double[::1] lower, double[::1] inv_beta, double[::1] gamma,
                          double[::1] side, double[::1] last, double last_diag,
                          Py_ssize_t J) noexcept nogil:
    x[:] = n1
    y[:] = n2
    _cyclic_solve2(x, y, lower, inv_beta, gamma, side, last, last_diag, J)
    _flux_update(n1, x, r, J)
    _flux_update(n2, y, r, J)


def strang_advance(double[::1] n1, double[::1] n2, Py_ssize_t nsteps,
                   double[::1] c11, double[::1] c12, double[::1] c21, double[::1] c22,
                   double[::1] ap1, double[::1] am1, double[::1] ap2, double[::1] am2,
                   bint drift1, bint drift2, double r,
                   double[::1] lower, double[::1] inv_beta, double[::1] gamma,
                   double[::1] side, double[::1] last, double last_diag,
                   double[::1] work, double[::1] work2):
    """Advance ``(n1, n2)`` in place by ``nsteps`` Strang steps."""
    cdef Py_ssize_t J = n1.shape[0]
    cdef Py_ssize_t s
    with nogil:
        for s in range(nsteps):
            _react(n1, n2, c11, c12, c21, c22, J)
            if drift1:
                _upwind(n1, ap1, am1, work, J)
            if drift2:
                _upwind(n2, ap2, am2, work, J)
            _diffuse(n1, n2, work, work2, r, lower, inv_beta, gamma, side, last, last_diag, J)
            _react(n1, n2, c11, c12, c21, c22, J)


def cyclic_solve(double[::1] x, double[::1] lower, double[::1] inv_beta, double[::1] gamma,
                 double[::1] side, double[::1] last, double last_diag):
    """Solve in place with a precomputed cyclic factorization."""
    _cyclic_solve(x, lower, inv_beta, gamma, side, last, last_diag, x.shape[0])
