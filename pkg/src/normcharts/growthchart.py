"""Normative growth-chart modeling on a generalized gamma backbone.

Distribution: with z = (y/mu)^nu and theta = 1/(sigma^2 nu^2),

    pdf(y) = |nu| * theta^theta * z^theta * exp(-theta z) / (Gamma(theta) * y)

evaluated in log space throughout. mu and sigma are modeled through log
links. The location predictor is an intercept, a fractional-polynomial basis
of age in years, a sex indicator (1 for F), and per-scanner intercepts kept
mean-zero by a ridge penalty. sigma is log-linear with an optional
fractional-polynomial age term; nu is a constant shape.
"""

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import optimize, special

from .errors import DegenerateInput, DomainError, InvalidParams, ShapeError
from .phenotype import Region, SessionPhenotype
from .report_text import Sex

FP_POWERS = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0)


@dataclass(frozen=True)
class GGParams:
    mu: float
    sigma: float
    nu: float

    def __post_init__(self):
        ok = (
            math.isfinite(self.mu)
            and math.isfinite(self.sigma)
            and math.isfinite(self.nu)
            and self.mu > 0.0
            and self.sigma > 0.0
            and self.nu != 0.0
        )
        if not ok:
            raise InvalidParams(
                f"require mu>0, sigma>0, nu!=0 and finite; got {self}"
            )

    @property
    def theta(self) -> float:
        return 1.0 / (self.sigma * self.sigma * self.nu * self.nu)


@dataclass(frozen=True)
class FpSpec:
    order: int
    powers: tuple[float, ...]

    def __post_init__(self):
        if self.order not in (1, 2):
            raise InvalidParams(f"order must be 1 or 2, got {self.order}")
        if len(self.powers) != self.order:
            raise InvalidParams("powers length must equal order")
        for p in self.powers:
            if p not in FP_POWERS:
                raise InvalidParams(f"power {p} not in the allowed set")


def fp_basis(x: float, spec: FpSpec) -> list[float]:
    """Fractional-polynomial basis at x; power 0 means ln x.

    A repeated power (p, p) expands to [x^p, x^p * ln x], which for p = 0
    gives [ln x, (ln x)^2].
    """
    if x <= 0.0:
        raise DomainError(f"fractional polynomials need x > 0, got {x}")

    def term(p: float) -> float:
        return math.log(x) if p == 0.0 else x**p

    if spec.order == 1:
        return [term(spec.powers[0])]
    p, q = spec.powers
    if p == q:
        return [term(p), term(p) * math.log(x)]
    return [term(p), term(q)]


def fp_candidates() -> list[FpSpec]:
    """All first-order specs plus all unordered second-order pairs (8 + 36)."""
    first = [FpSpec(1, (p,)) for p in FP_POWERS]
    second = [
        FpSpec(2, (p, q)) for p, q in itertools.combinations_with_replacement(FP_POWERS, 2)
    ]
    return first + second


def gg_logpdf(y: float, p: GGParams) -> float:
    if y <= 0.0:
        raise DomainError(f"support is y > 0, got {y}")
    theta = p.theta
    w = math.log(y) - math.log(p.mu)
    z = math.exp(p.nu * w)
    return (
        math.log(abs(p.nu))
        + theta * math.log(theta)
        + theta * p.nu * w
        - theta * z
        - special.gammaln(theta)
        - math.log(y)
    )


def gg_pdf(y: float, p: GGParams) -> float:
    return math.exp(gg_logpdf(y, p))


def gg_cdf(y: float, p: GGParams) -> float:
    if y <= 0.0:
        raise DomainError(f"support is y > 0, got {y}")
    theta = p.theta
    z = math.exp(p.nu * (math.log(y) - math.log(p.mu)))
    if p.nu > 0:
        return float(special.gammainc(theta, theta * z))
    return float(special.gammaincc(theta, theta * z))


def gg_quantile(q: float, p: GGParams) -> float:
    """Invert gg_cdf by bracket expansion and Brent's method."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile probability must be in (0,1), got {q}")
    lo, hi = p.mu, p.mu
    for _ in range(200):
        if gg_cdf(lo, p) <= q:
            break
        lo *= 0.5
    for _ in range(200):
        if gg_cdf(hi, p) >= q:
            break
        hi *= 2.0
    if lo == hi:
        return lo
    return float(
        optimize.brentq(lambda y: gg_cdf(y, p) - q, lo, hi, xtol=1e-300, rtol=1e-10)
    )


def gg_sample_one(rng: np.random.Generator, p: GGParams) -> float:
    """One draw via the gamma representation y = mu * (G/theta)^(1/nu)."""
    theta = p.theta
    g = rng.gamma(theta)
    return float(p.mu * (g / theta) ** (1.0 / p.nu))


@dataclass(frozen=True)
class GrowthTruth:
    region: Region
    fp_mu: FpSpec
    mu_coef: tuple[float, ...]
    fp_sigma: Optional[FpSpec]
    sigma_coef: tuple[float, ...]
    nu: float
    scanner_intercepts: Mapping[str, float]


@dataclass(frozen=True)
class GrowthModel:
    region: Region
    fp_mu: FpSpec
    mu_coef: tuple[float, ...]
    fp_sigma: Optional[FpSpec]
    sigma_coef: tuple[float, ...]
    nu: float
    scanner_intercepts: Mapping[str, float]
    ridge_lambda: float
    converged: bool
    loglik: float
    bic: float


def params_at(
    model,
    age_years: float,
    sex: Sex,
    scanner_id: Optional[str] = None,
    extra_shift: float = 0.0,
) -> GGParams:
    """Evaluate the model's (mu, sigma, nu) at given covariates.

    Unknown scanners get no intercept, yielding a population-level curve.
    Works for GrowthModel and GrowthTruth alike.
    """
    basis = fp_basis(age_years, model.fp_mu)
    eta = model.mu_coef[0]
    for c, b in zip(model.mu_coef[1 : 1 + len(basis)], basis):
        eta += c * b
    eta += model.mu_coef[-1] * (1.0 if sex is Sex.F else 0.0)
    if scanner_id is not None:
        eta += model.scanner_intercepts.get(scanner_id, 0.0)
    eta += extra_shift
    eta_sigma = model.sigma_coef[0]
    if model.fp_sigma is not None:
        for c, b in zip(model.sigma_coef[1:], fp_basis(age_years, model.fp_sigma)):
            eta_sigma += c * b
    return GGParams(mu=math.exp(eta), sigma=math.exp(eta_sigma), nu=model.nu)


def truth_params(
    truth: GrowthTruth, age_years: float, sex: Sex, scanner_shift: float = 0.0
) -> GGParams:
    return params_at(truth, age_years, sex, scanner_id=None, extra_shift=scanner_shift)


def _basis_matrix(ages: np.ndarray, spec: FpSpec) -> np.ndarray:
    return np.asarray([fp_basis(a, spec) for a in ages], dtype=float)


_BIG = 1e30


def _neg_penalized_loglik(vec, logy, x_mu, x_sigma, scanner_idx, n_scanners, lam):
    """Negative penalized log-likelihood and its analytic gradient.

    Layout of vec: mu coefficients, scanner intercepts, sigma coefficients,
    nu. Returns (_BIG, zeros) on numerical blow-up so the optimizer backs off.
    """
    p_mu = x_mu.shape[1]
    p_sig = x_sigma.shape[1]
    beta_mu = vec[:p_mu]
    d = vec[p_mu : p_mu + n_scanners]
    beta_sig = vec[p_mu + n_scanners : p_mu + n_scanners + p_sig]
    nu = vec[-1]
    if nu == 0.0:
        return _BIG, np.zeros_like(vec)
    eta_mu = x_mu @ beta_mu + d[scanner_idx]
    log_sigma = x_sigma @ beta_sig
    with np.errstate(over="ignore", invalid="ignore"):
        w = logy - eta_mu
        theta = np.exp(-2.0 * log_sigma) / (nu * nu)
        z = np.exp(nu * w)
        log_theta = -2.0 * log_sigma - 2.0 * math.log(abs(nu))
        ll = (
            math.log(abs(nu))
            + theta * log_theta
            + theta * nu * w
            - theta * z
            - special.gammaln(theta)
            - logy
        )
    if not np.all(np.isfinite(ll)):
        return _BIG, np.zeros_like(vec)
    penalty = lam * float(d @ d)
    obj = -(float(np.sum(ll)) - penalty)
    digam = special.digamma(theta)
    a = log_theta + 1.0 + nu * w - z - digam
    g_mu = theta * nu * (z - 1.0)
    g_sigma = -2.0 * theta * a
    g_nu = 1.0 / nu + theta * w * (1.0 - z) - (2.0 * theta / nu) * a
    grad = np.empty_like(vec)
    grad[:p_mu] = x_mu.T @ g_mu
    grad[p_mu : p_mu + n_scanners] = (
        np.bincount(scanner_idx, weights=g_mu, minlength=n_scanners) - 2.0 * lam * d
    )
    grad[p_mu + n_scanners : p_mu + n_scanners + p_sig] = x_sigma.T @ g_sigma
    grad[-1] = float(np.sum(g_nu))
    if not np.all(np.isfinite(grad)):
        return _BIG, np.zeros_like(vec)
    return obj, -grad


@dataclass(frozen=True)
class FitOptions:
    fp_candidates: Optional[Sequence[FpSpec]] = None
    sigma_age: bool = True
    ridge_lambda: float = 1.0
    max_iter: int = 400
    tol: float = 1e-3
    n_restarts: int = 3


# The scale predictor uses a fixed first-order basis when sigma_age is on;
# candidate search applies to the location predictor only.
SIGMA_FP = FpSpec(1, (1.0,))


def _fit_one(logy, x_mu, x_sigma, scanner_idx, n_scanners, options):
    n = logy.size
    p_mu = x_mu.shape[1]
    p_sig = x_sigma.shape[1]
    y = np.exp(logy)
    med = float(np.median(y))
    cv = float(np.std(y) / np.mean(y))
    cv = min(max(cv, 1e-3), 5.0)
    nu_inits = [1.0, 2.0, 0.5] + [1.5] * max(0, options.n_restarts - 3)
    best = None
    for r in range(options.n_restarts):
        x0 = np.zeros(p_mu + n_scanners + p_sig + 1)
        x0[0] = math.log(med)
        x0[p_mu + n_scanners] = math.log(cv)
        x0[-1] = nu_inits[r]
        if r > 0:
            rng = np.random.default_rng(1000 + r)
            x0[:p_mu] += rng.normal(0.0, 0.05, size=p_mu)
        bounds = [(None, None)] * (p_mu + n_scanners + p_sig) + [(0.05, 8.0)]
        res = optimize.minimize(
            _neg_penalized_loglik,
            x0,
            args=(logy, x_mu, x_sigma, scanner_idx, n_scanners, options.ridge_lambda),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": options.max_iter, "ftol": 1e-12, "gtol": 1e-8},
        )
        if best is None or res.fun < best.fun:
            best = res
    converged = bool(best.success or np.max(np.abs(best.jac)) < options.tol * n)
    return best, converged


def fit(
    cohort: Sequence[SessionPhenotype],
    region: Region,
    options: FitOptions = FitOptions(),
) -> GrowthModel:
    """Fit the growth model, selecting the location basis by BIC.

    Every candidate basis is fit by L-BFGS-B with analytic gradients from
    several seeded starts; BIC = -2 loglik + k ln n over all free
    coefficients decides. Scanner intercepts are exactly recentered after
    the fit, with the shift folded into the intercept.
    """
    if len(cohort) < 30:
        raise DegenerateInput(f"need at least 30 sessions, got {len(cohort)}")
    y = np.asarray([s.volumes[region] for s in cohort], dtype=float)
    if np.any(y <= 0.0):
        raise DegenerateInput("volumes must be positive")
    ages = np.asarray([s.age_years for s in cohort], dtype=float)
    sex_col = np.asarray([1.0 if s.sex is Sex.F else 0.0 for s in cohort])
    scanners = sorted({s.scanner_id for s in cohort})
    scanner_pos = {sid: i for i, sid in enumerate(scanners)}
    scanner_idx = np.asarray([scanner_pos[s.scanner_id] for s in cohort])
    logy = np.log(y)
    n = y.size
    one_sex = len(set(sex_col.tolist())) == 1
    if one_sex:
        warnings.warn("single-sex cohort: sex coefficient dropped", stacklevel=2)
    fp_sigma = SIGMA_FP if options.sigma_age else None
    if fp_sigma is not None:
        x_sigma = np.column_stack([np.ones(n), _basis_matrix(ages, fp_sigma)])
    else:
        x_sigma = np.ones((n, 1))
    candidates = list(options.fp_candidates) if options.fp_candidates else fp_candidates()
    best_model = None
    for spec in candidates:
        basis = _basis_matrix(ages, spec)
        cols = [np.ones(n), basis]
        if not one_sex:
            cols.append(sex_col.reshape(-1, 1))
        x_mu = np.column_stack(cols)
        res, converged = _fit_one(
            logy, x_mu, x_sigma, scanner_idx, len(scanners), options
        )
        p_mu = x_mu.shape[1]
        beta_mu = res.x[:p_mu]
        d = res.x[p_mu : p_mu + len(scanners)]
        beta_sig = res.x[p_mu + len(scanners) : p_mu + len(scanners) + x_sigma.shape[1]]
        nu = float(res.x[-1])
        shift = float(np.mean(d))
        d = d - shift
        beta_mu = beta_mu.copy()
        beta_mu[0] += shift
        # unpenalized loglik at the centered parameters, for BIC
        vec = np.concatenate([beta_mu, d, beta_sig, [nu]])
        obj, _ = _neg_penalized_loglik(
            vec, logy, x_mu, x_sigma, scanner_idx, len(scanners), options.ridge_lambda
        )
        loglik = -obj + options.ridge_lambda * float(d @ d)
        k = p_mu + len(scanners) + x_sigma.shape[1] + 1
        bic = -2.0 * loglik + k * math.log(n)
        mu_coef = list(beta_mu)
        if one_sex:
            mu_coef.append(0.0)
        model = GrowthModel(
            region=region,
            fp_mu=spec,
            mu_coef=tuple(float(c) for c in mu_coef),
            fp_sigma=fp_sigma,
            sigma_coef=tuple(float(c) for c in beta_sig),
            nu=nu,
            scanner_intercepts={sid: float(d[i]) for sid, i in scanner_pos.items()},
            ridge_lambda=options.ridge_lambda,
            converged=converged,
            loglik=float(loglik),
            bic=float(bic),
        )
        if best_model is None or model.bic < best_model.bic:
            best_model = model
    return best_model


def centile(model: GrowthModel, session: SessionPhenotype) -> float:
    """Where the session's volume sits in the model's distribution, in (0,1)."""
    if model.region not in session.volumes:
        raise ShapeError(f"session lacks volume for {model.region.value}")
    p = params_at(model, session.age_years, session.sex, scanner_id=session.scanner_id)
    c = gg_cdf(session.volumes[model.region], p)
    eps = 1e-15
    return min(max(c, eps), 1.0 - eps)


def percentile_curves(
    model: GrowthModel,
    age_grid: Sequence[float],
    sex: Sex,
    probs: Sequence[float] = (0.025, 0.5, 0.975),
) -> list[dict]:
    """Population-level quantile curves over an age grid, one row per age."""
    for q in probs:
        if not 0.0 < q < 1.0:
            raise DomainError(f"probability {q} outside (0,1)")
    rows = []
    for age in age_grid:
        p = params_at(model, age, sex, scanner_id=None)
        row = {"age_years": float(age)}
        for q in probs:
            row[f"p{100 * q:g}"] = gg_quantile(q, p)
        rows.append(row)
    return rows


def compare_centiles(a: Sequence[float], b: Sequence[float]) -> float:
    """Sample Pearson correlation between two centile vectors."""
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 3:
        raise ShapeError("need at least 3 paired values")
    av = np.asarray(a, dtype=float)
    bv = np.asarray(b, dtype=float)
    if float(np.var(av)) == 0.0 or float(np.var(bv)) == 0.0:
        raise DegenerateInput("zero variance in a centile vector")
    ac = av - av.mean()
    bc = bv - bv.mean()
    return float((ac @ bc) / math.sqrt((ac @ ac) * (bc @ bc)))


def model_to_dict(model: GrowthModel) -> dict:
    return {
        "region": model.region.value,
        "fp_mu": {"order": model.fp_mu.order, "powers": list(model.fp_mu.powers)},
        "mu_coef": list(model.mu_coef),
        "fp_sigma": None
        if model.fp_sigma is None
        else {"order": model.fp_sigma.order, "powers": list(model.fp_sigma.powers)},
        "sigma_coef": list(model.sigma_coef),
        "nu": model.nu,
        "scanner_intercepts": dict(model.scanner_intercepts),
        "ridge_lambda": model.ridge_lambda,
        "converged": model.converged,
        "loglik": model.loglik,
        "bic": model.bic,
    }


def model_from_dict(doc: dict) -> GrowthModel:
    fp_sigma = doc.get("fp_sigma")
    return GrowthModel(
        region=Region(doc["region"]),
        fp_mu=FpSpec(doc["fp_mu"]["order"], tuple(doc["fp_mu"]["powers"])),
        mu_coef=tuple(doc["mu_coef"]),
        fp_sigma=None if fp_sigma is None else FpSpec(fp_sigma["order"], tuple(fp_sigma["powers"])),
        sigma_coef=tuple(doc["sigma_coef"]),
        nu=float(doc["nu"]),
        scanner_intercepts={k: float(v) for k, v in doc["scanner_intercepts"].items()},
        ridge_lambda=float(doc["ridge_lambda"]),
        converged=bool(doc["converged"]),
        loglik=float(doc["loglik"]),
        bic=float(doc["bic"]),
    )


def save_growth_model(path, model: GrowthModel) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f, indent=2, sort_keys=True)
        f.write("\n")


def load_growth_model(path) -> GrowthModel:
    with open(path, encoding="utf-8") as f:
        return model_from_dict(json.load(f))
