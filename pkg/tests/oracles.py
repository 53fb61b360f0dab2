"""Independent reference computations used only by the tests.

None of these share code paths with the package's solvers: the integrator
never diagonalizes, the Wigner kernel uses scipy's Laguerre polynomials and
explicit factorials, and the Dyson terms come from a block matrix exponential
or from direct ODE integration of the perturbative hierarchy.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.special import eval_genlaguerre


def rabi_hamiltonian(g, n_max, rwa=False, omega=1.0, omega_a=1.0):
    """Built from scratch with explicit loops, qubit slow / Fock fast, sigma_z|g> = +|g>."""
    d = n_max + 1
    diag = np.zeros(2 * d)
    for q, sz in ((0, 1.0), (1, -1.0)):
        for n in range(d):
            diag[q * d + n] = -0.5 * omega_a * sz + omega * (n + 0.5)
    lower = np.zeros((2 * d, 2 * d), dtype=complex)  # <e, m| H |g, n>
    for n in range(d):
        if n >= 1:
            lower[d + n - 1, n] += g * math.sqrt(n)  # sigma_+ a
        if not rwa and n + 1 < d:
            lower[d + n + 1, n] += g * math.sqrt(n + 1)  # sigma_+ a^dagger
    return np.diag(diag).astype(complex) + lower + lower.conj().T


def rk4_evolve(h, psi0, tau, dt=1e-4):
    """Classic fourth-order Runge-Kutta for i dpsi/dt = H psi with a fixed step."""
    n = max(1, int(math.ceil(tau / dt)))
    dt = tau / n
    psi = np.asarray(psi0, dtype=complex).copy()
    a = -1j * h
    for _ in range(n):
        k1 = a @ psi
        k2 = a @ (psi + 0.5 * dt * k1)
        k3 = a @ (psi + 0.5 * dt * k2)
        k4 = a @ (psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def wigner_brute(rho, x, p):
    """Direct double sum over |m><n| kernels with explicit factorials (small dims only)."""
    alpha_c = math.sqrt(2.0) * (np.asarray(x) - 1j * np.asarray(p))
    r2 = np.asarray(x) ** 2 + np.asarray(p) ** 2
    w = np.zeros(np.broadcast(x, p).shape, dtype=complex)
    d = rho.shape[0]
    for m in range(d):
        for n in range(d):
            if rho[m, n] == 0:
                continue
            if m >= n:
                k = m - n
                kern = ((-1) ** n / math.pi) * math.sqrt(math.factorial(n) / math.factorial(m)) \
                    * alpha_c ** k * np.exp(-r2) * eval_genlaguerre(n, k, 2 * r2)
            else:
                k = n - m
                kern = ((-1) ** m / math.pi) * math.sqrt(math.factorial(m) / math.factorial(n)) \
                    * np.conj(alpha_c) ** k * np.exp(-r2) * eval_genlaguerre(m, k, 2 * r2)
            w += rho[m, n] * kern
    return w


def fock_one_negativity():
    """Twice the negative volume of W for |1><1|, by the radial integral of (1 - 2u) e^-u on [0, 1/2]."""
    return 2.0 * (2.0 * math.exp(-0.5) - 1.0)


def dyson_block_expm(h0, hi, k, tau, psi0):
    """Order-by-order terms from exp of the block lower-bidiagonal generator."""
    dim = h0.shape[0]
    big = np.zeros(((k + 1) * dim, (k + 1) * dim), dtype=complex)
    for j in range(k + 1):
        big[j * dim:(j + 1) * dim, j * dim:(j + 1) * dim] = -1j * h0
        if j:
            big[j * dim:(j + 1) * dim, (j - 1) * dim:j * dim] = -1j * hi
    v = np.zeros((k + 1) * dim, dtype=complex)
    v[:dim] = psi0
    return (expm(tau * big) @ v).reshape(k + 1, dim)


def dyson_hierarchy_ode(h0, hi, k, tau, psi0, tol=1e-12):
    """Integrate psi_j' = -i H0 psi_j - i HI psi_{j-1} with an adaptive solver."""
    dim = h0.shape[0]

    def rhs(_t, y):
        y = y.reshape(k + 1, dim)
        out = -1j * (y @ h0.T)
        out[1:] += -1j * (y[:-1] @ hi.T)
        return out.ravel()

    y0 = np.zeros((k + 1) * dim, dtype=complex)
    y0[:dim] = psi0
    sol = solve_ivp(rhs, (0.0, tau), y0, method="DOP853", rtol=tol, atol=tol)
    return sol.y[:, -1].reshape(k + 1, dim)
