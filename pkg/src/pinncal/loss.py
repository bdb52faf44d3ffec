"""Composite training objectives for the calibration problem.

Enhanced mode: L = L_pde + L_work + lambda_o * (per-component relative data
losses). Standard mode (failure baseline): plain-MSE data loss, PDE loss and
a Neumann boundary loss on an un-normalized network with the material
parameter optimized directly.

Objectives are callables x -> (value, gradient) over one flat parameter
vector: network parameters (layer-major, weights then biases, second network
appended after the first), then the material correction factors (or the raw
material parameters in standard mode).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import mechanics, network as nw
from .network import ConfigurationError
from .tape import Tape, grad_loss, mean, square

U_CHAR_ZERO_TOL = 1e-12


@dataclass
class TrainingSet:
    """Point sets for the loss terms. In the default (coincident) setup the
    PDE, interior-work and data sets share one coordinate array."""

    data_points: np.ndarray          # (N_o, d)
    data_displacements: np.ndarray   # (N_o, n_comp)
    pde_points: np.ndarray           # (N_pde, d)
    work_interior_points: np.ndarray  # (N_W_int, d)
    work_boundary_points: np.ndarray  # (N_W_ext, d)
    work_boundary_tractions: np.ndarray  # (N_W_ext, n_comp)
    volume: float
    boundary_measure: float
    neumann_points: np.ndarray | None = None       # standard mode
    neumann_tractions: np.ndarray | None = None
    neumann_normals: np.ndarray | None = None

    def __post_init__(self):
        for name in ("data_points", "pde_points", "work_interior_points",
                     "work_boundary_points"):
            setattr(self, name, np.atleast_2d(
                np.asarray(getattr(self, name), dtype=np.float64)))
        self.data_displacements = np.atleast_2d(
            np.asarray(self.data_displacements, dtype=np.float64))
        self.work_boundary_tractions = np.atleast_2d(
            np.asarray(self.work_boundary_tractions, dtype=np.float64))
        if len(self.data_points) != len(self.data_displacements):
            raise ConfigurationError("data points/displacements length mismatch")
        if self.volume <= 0 or self.boundary_measure <= 0:
            raise ConfigurationError("domain measures must be positive")


@dataclass
class LossWeights:
    data_weight: float = 1e5     # lambda_o
    pde_weight: float = 1.0      # standard mode only; fixed 1 in enhanced mode
    bc_weight: float = 1.0       # standard mode only

    def __post_init__(self):
        if min(self.data_weight, self.pde_weight, self.bc_weight) < 0:
            raise ConfigurationError("loss weights must be non-negative")


@dataclass
class LossBreakdown:
    """Per-term values; `work` is the signed balance W_int - W_ext even when
    the optimizer minimizes its square. `total` is the optimized objective."""

    pde: float
    work: float
    data: dict = field(default_factory=dict)   # component name -> loss
    bc: float | None = None
    total: float = 0.0
    alphas: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"pde": self.pde, "work": self.work, "total": self.total}
        for key, val in self.data.items():
            out[f"data_{key}"] = val
        if self.bc is not None:
            out["bc"] = self.bc
        out.update(self.alphas)
        return out


def characteristic_displacement(displacements: np.ndarray) -> np.ndarray:
    """Componentwise mean of the observed displacements (Hadamard divisor of
    the relative data loss)."""
    displacements = np.atleast_2d(np.asarray(displacements, dtype=np.float64))
    if displacements.shape[0] < 1:
        raise ConfigurationError("empty data set")
    u_char = displacements.mean(axis=0)
    scale = np.abs(displacements).max()
    for j, val in enumerate(u_char):
        if abs(val) <= U_CHAR_ZERO_TOL * max(scale, 1.0):
            raise ConfigurationError(
                f"characteristic displacement of component {j} is zero; "
                "pass an explicit override value")
    return u_char


def total_from_components(mode: str, weights: LossWeights,
                          breakdown: LossBreakdown) -> float:
    """Weighted recombination, used to verify breakdown bookkeeping."""
    data_sum = sum(breakdown.data.values())
    if mode == "enhanced":
        return breakdown.pde + breakdown.work + weights.data_weight * data_sum
    if mode == "standard":
        return (weights.pde_weight * breakdown.pde
                + weights.bc_weight * (breakdown.bc or 0.0)
                + weights.data_weight * data_sum)
    raise ValueError(f"unknown mode {mode!r}")


class _BreakdownCache:
    """Small ring buffer so per-iteration logging can recover the breakdown
    of an accepted iterate without re-evaluating the objective."""

    def __init__(self, maxlen=16):
        self._entries = deque(maxlen=maxlen)

    def put(self, x: np.ndarray, breakdown: LossBreakdown):
        self._entries.append((x.copy(), breakdown))

    def get(self, x: np.ndarray) -> LossBreakdown | None:
        for stored, breakdown in reversed(self._entries):
            if stored.shape == x.shape and np.array_equal(stored, x):
                return breakdown
        return None


class EnhancedObjective:
    """Enhanced-mode loss over (theta, alpha) for 1D (one network, E) or 2D
    (two networks, K and G) calibration."""

    def __init__(self, nets: list[nw.NormalizedNetwork],
                 estimates: np.ndarray, training: TrainingSet,
                 weights: LossWeights, u_char: np.ndarray | None = None,
                 ambient: str = "plane_stress",
                 work_loss_form: str = "squared"):
        if len(nets) not in (1, 2):
            raise ConfigurationError("expected one (1D) or two (2D) networks")
        if work_loss_form not in ("squared", "signed"):
            raise ConfigurationError(f"unknown work_loss_form {work_loss_form!r}")
        self.nets = nets
        self.dim = len(nets)
        self.estimates = np.atleast_1d(np.asarray(estimates, dtype=np.float64))
        if self.estimates.size != self.dim:
            raise ConfigurationError("one estimate per material parameter "
                                     "(E in 1D; K, G in 2D)")
        self.training = training
        self.weights = weights
        self.ambient = ambient
        self.work_loss_form = work_loss_form
        self.u_char = (characteristic_displacement(training.data_displacements)
                       if u_char is None else np.atleast_1d(u_char))
        self._net_sizes = [nn.net.n_params() for nn in nets]
        self.breakdowns = _BreakdownCache()

    @property
    def n_params(self) -> int:
        return sum(self._net_sizes) + self.dim

    def initial_vector(self, alphas=None) -> np.ndarray:
        alphas = np.zeros(self.dim) if alphas is None else np.asarray(alphas)
        return np.concatenate(
            [nw.pack_parameters(nn.net) for nn in self.nets] + [alphas])

    def split(self, x: np.ndarray):
        thetas, off = [], 0
        for size in self._net_sizes:
            thetas.append(x[off:off + size])
            off += size
        return thetas, x[off:]

    def networks_at(self, x: np.ndarray) -> list[nw.NormalizedNetwork]:
        thetas, _ = self.split(x)
        return [nw.NormalizedNetwork(nw.unpack_parameters(nn.net, theta), nn.spec)
                for nn, theta in zip(self.nets, thetas)]

    def material_at(self, x: np.ndarray) -> np.ndarray:
        _, alphas = self.split(x)
        return (1.0 + alphas) * self.estimates

    def _feasible(self, effective: np.ndarray) -> bool:
        if np.any(effective <= 0):
            return False
        if self.dim == 2:
            k, g = effective
            _, nu = mechanics.convert_KG_to_Enu(k, g)
            if nu >= 0.5 - mechanics.NU_INCOMPRESSIBLE_TOL:
                return False
        return True

    def __call__(self, x: np.ndarray):
        thetas, alphas = self.split(x)
        if not self._feasible((1.0 + alphas) * self.estimates):
            return np.inf, np.full(x.size, np.nan)
        tape = Tape()
        leaves = []
        nets_p = []
        for nn, theta in zip(self.nets, thetas):
            ws, bs, off = [], [], 0
            for w, b in zip(nn.net.weights, nn.net.biases):
                wn = tape.leaf(theta[off:off + w.size].reshape(w.shape))
                off += w.size
                bn = tape.leaf(theta[off:off + b.size])
                off += b.size
                ws.append(wn)
                bs.append(bn)
                leaves.extend([wn, bn])
            nets_p.append((ws, bs))
        alpha_nodes = [tape.leaf(a) for a in alphas]
        leaves.extend(alpha_nodes)

        ts = self.training
        coincident = ts.pde_points is ts.work_interior_points

        def eval_net(i, points, need_second):
            ws, bs = nets_p[i]
            return nw.evaluate_on_tape(tape, self.nets[i], points, ws, bs,
                                       need_second=need_second)

        if self.dim == 1:
            e_est = float(self.estimates[0])
            e_node = (1.0 + alpha_nodes[0]) * e_est
            u_col, first_col, second_col = eval_net(0, ts.pde_points, True)
            residual = e_node * second_col[(0, 0)]
            loss_pde = mean(square(residual))
            if coincident:
                first_w = first_col
            else:
                _, first_w, _ = eval_net(0, ts.work_interior_points, False)
            w_int = mechanics.internal_work_1d(
                e_node, first_w[0], ts.volume, len(ts.work_interior_points))
            u_b, _, _ = eval_net(0, ts.work_boundary_points, False)
            w_ext = mechanics.external_work(
                ts.work_boundary_tractions, [u_b], ts.boundary_measure)
            if ts.data_points is ts.pde_points:
                u_data = [u_col]
            else:
                u_data = [eval_net(0, ts.data_points, False)[0]]
            data_losses = {"u": mean(square(
                (u_data[0] - ts.data_displacements[:, :1]) / self.u_char[0]))}
        else:
            k_node = (1.0 + alpha_nodes[0]) * float(self.estimates[0])
            g_node = (1.0 + alpha_nodes[1]) * float(self.estimates[1])
            if self.ambient == "plane_stress":
                e_node, nu_node = mechanics.convert_KG_to_Enu(k_node, g_node)
                c11, c12, c_shear = mechanics.plane_stress_coefficients(
                    e_node, nu_node)
            else:
                c11, c12, c_shear = mechanics.plane_strain_coefficients(
                    k_node, g_node)
            ux_col, fx_col, sx_col = eval_net(0, ts.pde_points, True)
            uy_col, fy_col, sy_col = eval_net(1, ts.pde_points, True)
            r_x, r_y = mechanics.divergence_of_stress_2d(
                fx_col, sx_col, fy_col, sy_col, c11, c12, c_shear)
            loss_pde = mean(square(r_x)) + mean(square(r_y))
            if coincident:
                fx_w, fy_w = fx_col, fy_col
            else:
                _, fx_w, _ = eval_net(0, ts.work_interior_points, False)
                _, fy_w, _ = eval_net(1, ts.work_interior_points, False)
            w_int = mechanics.internal_work_2d(
                fx_w, fy_w, c11, c12, c_shear, ts.volume,
                len(ts.work_interior_points))
            ux_b, _, _ = eval_net(0, ts.work_boundary_points, False)
            uy_b, _, _ = eval_net(1, ts.work_boundary_points, False)
            w_ext = mechanics.external_work(
                ts.work_boundary_tractions, [ux_b, uy_b], ts.boundary_measure)
            if ts.data_points is ts.pde_points:
                u_data = [ux_col, uy_col]
            else:
                u_data = [eval_net(0, ts.data_points, False)[0],
                          eval_net(1, ts.data_points, False)[0]]
            data_losses = {
                "x": mean(square(
                    (u_data[0] - ts.data_displacements[:, :1]) / self.u_char[0])),
                "y": mean(square(
                    (u_data[1] - ts.data_displacements[:, 1:2]) / self.u_char[1])),
            }

        work_signed = w_int - w_ext
        work_term = square(work_signed) if self.work_loss_form == "squared" \
            else work_signed
        data_sum = None
        for term in data_losses.values():
            data_sum = term if data_sum is None else data_sum + term
        total = loss_pde + work_term + self.weights.data_weight * data_sum

        grad = grad_loss(tape, total, leaves)
        alpha_names = ["alpha_E"] if self.dim == 1 else ["alpha_K", "alpha_G"]
        breakdown = LossBreakdown(
            pde=float(loss_pde.value),
            work=float(work_signed.value),
            data={key: float(val.value) for key, val in data_losses.items()},
            total=float(total.value),
            alphas=dict(zip(alpha_names, alphas.tolist())))
        self.breakdowns.put(x, breakdown)
        return float(total.value), grad


class StandardObjective1D:
    """Standard-formulation baseline on the rod: un-normalized network,
    Young's modulus optimized directly, Neumann traction condition at the
    loaded end. Known to fail in the realistic data regime."""

    def __init__(self, net: nw.FeedForwardNet, training: TrainingSet,
                 weights: LossWeights, traction: float, loaded_end: float,
                 e_initial: float):
        self.net = net
        self.training = training
        self.weights = weights
        self.traction = float(traction)
        self.loaded_end = float(loaded_end)
        self.e_initial = float(e_initial)

    @property
    def n_params(self) -> int:
        return self.net.n_params() + 1

    def initial_vector(self) -> np.ndarray:
        return np.concatenate([nw.pack_parameters(self.net), [self.e_initial]])

    def __call__(self, x: np.ndarray):
        theta, e_mod = x[:-1], x[-1]
        tape = Tape()
        ws, bs, leaves, off = [], [], [], 0
        for w, b in zip(self.net.weights, self.net.biases):
            wn = tape.leaf(theta[off:off + w.size].reshape(w.shape))
            off += w.size
            bn = tape.leaf(theta[off:off + b.size])
            off += b.size
            ws.append(wn)
            bs.append(bn)
            leaves.extend([wn, bn])
        e_node = tape.leaf(np.asarray(e_mod))
        leaves.append(e_node)

        ts = self.training
        u_col, first_col, second_col = nw.raw_network_on_tape(
            tape, self.net, ts.pde_points, ws, bs)
        loss_pde = mean(square(e_node * second_col[(0, 0)]))
        _, first_b, _ = nw.raw_network_on_tape(
            tape, self.net, np.array([[self.loaded_end]]), ws, bs)
        loss_bc = mean(square(e_node * first_b[0] - self.traction))
        if ts.data_points is ts.pde_points:
            u_data = u_col
        else:
            u_data, _, _ = nw.raw_network_on_tape(
                tape, self.net, ts.data_points, ws, bs)
        loss_data = mean(square(u_data - ts.data_displacements[:, :1]))

        total = (self.weights.pde_weight * loss_pde
                 + self.weights.bc_weight * loss_bc
                 + self.weights.data_weight * loss_data)
        grad = grad_loss(tape, total, leaves)
        return float(total.value), grad

    def identified_modulus(self, x: np.ndarray) -> float:
        return float(x[-1])


def bc_neumann_residuals_2d(first_x, first_y, c11, c12, c_shear,
                            normals: np.ndarray, tractions: np.ndarray):
    """Pointwise sigma.n - t_bar on a Neumann boundary (standard mode)."""
    exx, eyy = first_x[0], first_y[1]
    exy = 0.5 * (first_x[1] + first_y[0])
    sxx = c11 * exx + c12 * eyy
    syy = c12 * exx + c11 * eyy
    sxy = c_shear * exy
    n_x = normals[:, :1]
    n_y = normals[:, 1:2]
    r_x = sxx * n_x + sxy * n_y - tractions[:, :1]
    r_y = sxy * n_x + syy * n_y - tractions[:, 1:2]
    return r_x, r_y
