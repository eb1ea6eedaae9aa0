import mpmath
import numpy as np
import pytest

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, passed: bool, detail: str) -> None:
    _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def j0_series_oracle(x: float, terms: int = 80) -> float:
    """Power series for J0 in 50-digit arithmetic, independent of the package code."""
    with mpmath.workdps(50):
        x = mpmath.mpf(x)
        u = -(x * x) / 4
        term = mpmath.mpf(1)
        total = mpmath.mpf(1)
        for k in range(1, terms):
            term = term * u / (k * k)
            total += term
        return float(total)


def rel_fro(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def random_covariance(dim: int, seed: int, decay: float = 0.8) -> np.ndarray:
    """Hermitian PSD test matrix with geometric eigenvalues, trace = dim."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    lam = decay ** np.arange(dim)
    lam *= dim / lam.sum()
    c = (q * lam) @ q.conj().T
    return 0.5 * (c + c.conj().T)


DEFAULT_GRID = dict(n_subcarriers=48, n_symbols=14, subcarrier_spacing=60e3,
                  symbol_duration=0.25e-3 / 14, max_doppler=800.0)
WAVELENGTH_3P5 = 299792458.0 / 3.5e9


@pytest.fixture
def default_grid():
    from chansim import GridConfig

    return GridConfig(**DEFAULT_GRID)


@pytest.fixture
def mimo_arrays():
    from chansim import ula_config

    return ula_config(16, 0.5, WAVELENGTH_3P5), ula_config(8, 0.5, WAVELENGTH_3P5)

