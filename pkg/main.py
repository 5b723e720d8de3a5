"""
Main orchestration script for the Killing Geometry Toolkit
"""

import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from config import LOG_FILE
from exceptions import KillingGeometryError, ObstructionError, ValidationError
from calabi_duality import SpacelikeFunction, calabi_dual, norm_identity_residual
from cylinders_stability import (
    angle_function, cmc_cylinder_curve, cylinder_second_fundamental, rosenberg_threshold,
    stability_apply,
)
from holonomy import BaseCurve, DiskRegion, flux_integral, holonomy_displacement, horizontal_lift
from homogeneous_spaces import QuotientSpec, SemidirectModel, nil3_quotient_holonomy
from killing_graphs import GraphFunction, area_element_grid, div_jz_residual, mean_curvature
from minimal_solver import (
    connect_torus_model, obstruction_mean, solve_dirichlet, solve_minimal_torus,
    verify_area_minimality,
)
from model_config import build_model, load_config
from utils import (
    check_output_path, grid_frame, read_curve_csv, read_grid_csv, write_csv_atomic,
    write_json_atomic,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(verbose=False):
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    root = logging.getLogger()
    root.setLevel(level)
    if not any(isinstance(h, logging.FileHandler) and h.baseFilename == os.path.abspath(LOG_FILE)
               for h in root.handlers):
        handler = logging.FileHandler(LOG_FILE)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)


def _pair(text, name):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(name, f"expected comma-separated numbers, got {text!r}")
    if len(values) != 2:
        raise ValidationError(name, "expected two comma-separated numbers")
    return tuple(values)


def _numbers(text, name, count):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(name, f"expected comma-separated numbers, got {text!r}")
    if len(values) != count:
        raise ValidationError(name, f"expected {count} comma-separated numbers")
    return values


def _report_path(out):
    root, _ = os.path.splitext(out)
    return f"{root}.report.json"


class KillingGeometrySystem:
    def __init__(self, config=None):
        self.config = config
        self._model = None

    @property
    def model(self):
        if self.config is None:
            raise ValidationError("config", "this subcommand needs --config (or --model)")
        if self._model is None:
            self._model = build_model(self.config)
        return self._model

    def connected_model(self):
        """The model with a connection; torus models get the periodic potential"""
        model = self.model
        if not model.has_connection:
            logger.info("Solving the periodic potential for Z on the torus...")
            model = connect_torus_model(model, self.config.solver)
            self._model = model
        return model

    def _graph(self, source, column="u"):
        """GraphFunction from a CSV (columns x, y, <column>) or an expression"""
        model = self.model
        if os.path.isfile(source):
            return GraphFunction(model.domain, read_grid_csv(source, model.domain, column))
        return GraphFunction.from_expression(model.domain, source)

    def model_info(self):
        logger.info("=" * 60)
        logger.info("MODEL SUMMARY")
        logger.info("=" * 60)
        model = self.model
        domain = model.domain
        lam = domain.sample(model.lam)
        tau = domain.sample(model.tau)
        mu = domain.sample(model.mu)
        info = {
            "domain": repr(domain),
            "kind": domain.kind,
            "grid": [domain.nx, domain.ny],
            "z_source": model.z_source,
            "km_method": model.km_method,
            "lambda_min": float(np.nanmin(lam)),
            "mu_min": float(np.nanmin(mu)),
            "tau_min": float(np.nanmin(tau)),
            "tau_max": float(np.nanmax(tau)),
            "rosenberg_threshold": rosenberg_threshold(model),
        }
        if domain.periodic:
            info["obstruction_mean"] = obstruction_mean(model)
        else:
            info["flux"] = flux_integral(model)
        return info

    def lift(self, curve_path, t0):
        model = self.connected_model()
        curve = read_curve_csv(curve_path)
        lifted = horizontal_lift(model, curve, t0)
        logger.info(f"✓ Lifted {len(lifted.s)} samples, displacement {lifted.displacement:.12g}")
        return lifted.to_frame()

    def holonomy(self, circle=None, curve_path=None):
        model = self.connected_model()
        if circle is not None:
            cx, cy, r = circle
            curve = BaseCurve.circle((cx, cy), r)
        elif curve_path is not None:
            curve = read_curve_csv(curve_path, closed=True)
        else:
            raise ValidationError("curve", "give --circle or --curve")
        displacement = holonomy_displacement(model, curve)
        result = {"displacement": displacement, "curve": curve.name}
        if circle is not None:
            result["flux"] = flux_integral(model, DiskRegion((circle[0], circle[1]), circle[2]))
        logger.info(f"✓ Holonomy displacement d = {displacement:.12g}")
        return result

    def mean_curvature(self, graph):
        model = self.connected_model()
        u = self._graph(graph)
        return grid_frame(model.domain, H=mean_curvature(model, u), W=area_element_grid(model, u))

    def solve_minimal(self, verify=False):
        logger.info("=" * 60)
        logger.info("SOLVING FOR THE ENTIRE MINIMAL GRAPH")
        logger.info("=" * 60)
        config = self.config
        model = self.model
        report = solve_minimal_torus(model, config.solver)
        report.raise_for_status()
        summary = report.summary()
        if verify:
            minimality = config.minimality
            check = verify_area_minimality(self.connected_model(), report.solution, minimality.trials,
                                           config.seed, minimality.modes, minimality.amplitude)
            summary["minimality"] = check.summary()
        frame = grid_frame(model.domain, u=report.solution.values, H=report.H)
        return frame, summary

    def solve_dirichlet(self, boundary=None, H=None):
        logger.info("=" * 60)
        logger.info("SOLVING THE DIRICHLET PROBLEM")
        logger.info("=" * 60)
        config = self.config
        boundary = config.dirichlet.boundary if boundary is None else boundary
        H = config.dirichlet.H if H is None else H
        report = solve_dirichlet(self.model, boundary, H, config.solver)
        report.raise_for_status()
        summary = report.summary()
        summary["H_target"] = float(H)
        frame = grid_frame(self.model.domain, u=report.solution.values, H=report.H)
        return frame, summary

    def calabi(self, v_source):
        logger.info("=" * 60)
        logger.info("CALABI DUAL OF A SPACELIKE FUNCTION")
        logger.info("=" * 60)
        model = self.model
        if os.path.isfile(v_source):
            v = SpacelikeFunction(model, values=read_grid_csv(v_source, model.domain, "v"))
        else:
            v = SpacelikeFunction(model, expression=v_source)
        u = calabi_dual(model, v, self.config.solver)
        H = mean_curvature(model, u)
        identity = norm_identity_residual(model, v, u)
        summary = {
            "max_abs_H": float(np.nanmax(np.abs(H))),
            "max_identity_residual": float(np.nanmax(identity)),
            "spacelike_margin": v.margin,
        }
        return grid_frame(model.domain, u=u.values, H=H, identity_residual=identity), summary

    def cylinder(self, H, start, direction, length, samples, allow_partial=False):
        model = self.connected_model()
        curve = cmc_cylinder_curve(model, H, start, direction, length, allow_partial=allow_partial)
        s = curve.samples(samples)
        x, y = curve.position(s)
        kappa = curve.geodesic_curvature(s)
        sigma = np.array([cylinder_second_fundamental(model, curve, si) for si in s])
        logger.info(f"✓ Cylinder curve of length {curve.length:.6g} (complete: {curve.complete})")
        return pd.DataFrame({"s": s, "x": x, "y": y, "kappa_g": kappa, "sigma11": sigma[:, 0, 0],
                             "sigma12": sigma[:, 0, 1], "sigma22": sigma[:, 1, 1]})

    def stability(self, graph):
        model = self.connected_model()
        u = self._graph(graph)
        nu = angle_function(model, u)
        return grid_frame(model.domain, nu=nu, L_nu=stability_apply(model, u, nu))

    def check_jz(self):
        model = self.connected_model()
        residual = div_jz_residual(model)
        logger.info(f"✓ max |div(JZ) + 2 tau / mu| = {np.nanmax(np.abs(residual)):.3e} "
                    f"(z_source {model.z_source})")
        return grid_frame(model.domain, residual=residual)


def homogeneous_table(matrix, z_range):
    z0, z1, n = z_range
    if int(n) != n or n < 1:
        raise ValidationError("z-range", "sample count must be a positive integer")
    semidirect = SemidirectModel(np.reshape(matrix, (2, 2)))
    return pd.DataFrame(semidirect.table(np.linspace(z0, z1, int(n))))


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with 1; exit code 2 is kept for geometric obstructions"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _ArgumentParser(prog="killing-geometry",
                             description="Numerical geometry of Killing submersions")
    parser.add_argument("--config", help="YAML model/run config")
    parser.add_argument("--out", help="output file (CSV or JSON)")
    parser.add_argument("--seed", type=int, help="seed for randomised checks")
    parser.add_argument("--tol", type=float, help="solver tolerance")
    parser.add_argument("--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--model", help="YAML model/run config (same as --config)")
        sub.add_argument("--out", dest="sub_out", help="output file")
        sub.add_argument("--seed", dest="sub_seed", type=int, help="seed for randomised checks")
        sub.add_argument("--tol", dest="sub_tol", type=float, help="solver tolerance")
        return sub

    command("model-info", "summarise a model")
    sub = command("lift", "horizontal lift of a sampled base curve")
    sub.add_argument("--curve", required=True)
    sub.add_argument("--t0", type=float, default=0.0)
    sub = command("holonomy", "vertical displacement of a closed curve")
    sub.add_argument("--circle", help="cx,cy,r")
    sub.add_argument("--curve")
    sub = command("mc", "mean curvature of a Killing graph")
    sub.add_argument("--graph", required=True, help="CSV with x,y,u or an expression")
    sub = command("solve-minimal", "entire minimal graph over a torus")
    sub.add_argument("--verify", action="store_true", help="run random area-minimality trials")
    sub = command("solve-dirichlet", "constant mean curvature Dirichlet graph")
    sub.add_argument("--boundary")
    sub.add_argument("--H", type=float)
    sub = command("calabi", "minimal graph dual to a spacelike function")
    sub.add_argument("--v", required=True, help="CSV with x,y,v or an expression")
    sub = command("cylinder", "base curve of a CMC vertical cylinder")
    sub.add_argument("--H", type=float, required=True)
    sub.add_argument("--start", required=True, help="x,y")
    sub.add_argument("--dir", required=True, help="dx,dy")
    sub.add_argument("--length", type=float, required=True)
    sub.add_argument("--samples", type=int, default=513)
    sub.add_argument("--allow-partial", action="store_true")
    sub = command("stability", "stability operator applied to the angle function")
    sub.add_argument("--graph", required=True)
    sub = command("homogeneous", "Killing data of semidirect products and Nil3 quotients")
    sub.add_argument("--matrix", help="a11,a12,a21,a22")
    sub.add_argument("--z-range", help="z0,z1,n")
    sub.add_argument("--quotient", help="tau,a,b")
    command("check-jz", "residual of div(JZ) = -2 tau / mu")
    return parser


def _emit(result):
    print(json.dumps(result, indent=2, sort_keys=True, default=float))


def run(args):
    """Run one subcommand; returns the exit status"""
    out = args.sub_out or args.out
    check_output_path(out)
    config_path = args.model or args.config
    config = load_config(config_path) if config_path else None
    if config is not None:
        seed = args.seed if args.sub_seed is None else args.sub_seed
        tolerance = args.tol if args.sub_tol is None else args.sub_tol
        config = config.with_overrides(seed=seed, tolerance=tolerance)
        out = out or config.output
    system = KillingGeometrySystem(config)
    command = args.command

    if command == "model-info":
        info = system.model_info()
        _emit(info)
        if out:
            write_json_atomic(info, out)

    elif command == "lift":
        write_csv_atomic(system.lift(args.curve, args.t0), _required(out))

    elif command == "holonomy":
        circle = _numbers(args.circle, "circle", 3) if args.circle else None
        result = system.holonomy(circle, args.curve)
        _emit(result)
        if out:
            write_json_atomic(result, out)

    elif command == "mc":
        write_csv_atomic(system.mean_curvature(args.graph), _required(out))

    elif command in ("solve-minimal", "solve-dirichlet", "calabi"):
        out = _required(out)
        if command == "solve-minimal":
            frame, summary = system.solve_minimal(args.verify)
        elif command == "solve-dirichlet":
            frame, summary = system.solve_dirichlet(args.boundary, args.H)
        else:
            frame, summary = system.calabi(args.v)
        for key in ("iterations", "residual", "area", "converged"):
            if key in summary:
                print(f"{key}: {summary[key]}")
        write_csv_atomic(frame, out)
        write_json_atomic(summary, _report_path(out))

    elif command == "cylinder":
        frame = system.cylinder(args.H, _pair(args.start, "start"), _pair(args.dir, "dir"),
                                args.length, args.samples, args.allow_partial)
        write_csv_atomic(frame, _required(out))

    elif command == "stability":
        write_csv_atomic(system.stability(args.graph), _required(out))

    elif command == "homogeneous":
        if not (args.matrix or args.quotient):
            raise ValidationError("homogeneous", "give --matrix with --z-range, or --quotient")
        if args.matrix:
            if not args.z_range:
                raise ValidationError("z-range", "needed with --matrix")
            table = homogeneous_table(_numbers(args.matrix, "matrix", 4),
                                      _numbers(args.z_range, "z-range", 3))
            if out:
                write_csv_atomic(table, out)
            else:
                print(table.to_string(index=False))
        if args.quotient:
            tau, a, b = _numbers(args.quotient, "quotient", 3)
            _emit(nil3_quotient_holonomy(QuotientSpec(tau, a, b)).summary())

    elif command == "check-jz":
        write_csv_atomic(system.check_jz(), _required(out))

    return 0


def _required(out):
    if not out:
        raise ValidationError("out", "this subcommand writes a file; pass --out")
    return out


def main(argv=None):
    """Main execution function"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return run(args)
    except ObstructionError as e:
        logger.error(f"✗ Obstruction: {e}")
        return 2
    except KillingGeometryError as e:
        logger.error(f"✗ {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
