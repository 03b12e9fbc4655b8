"""Command line entry point: ``jsmoco simulate | recon | eval | selftest``.

Exit codes: 0 success, 2 configuration or input error, 3 sampler divergence,
4 self-test failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import shutil
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .core import FormatError, Measurements, load_grid, read_header, save_grid
from .csm import DEFAULT_POLY_ORDER, PolyCoeffs, coefficient_count
from .geometry import AcquisitionPlan, MotionParams, make_plan
from .metrics import SSIM_DEFAULTS, csm_nrmse, line_profiles, motion_error, psnr, ssim
from .nufft import DEFAULT_OPTIONS
from .priors import prior_from_config
from .sampler import SamplerConfig, SamplerDivergence, sample_joint
from .selftest import run_selftest
from .sim import MOTION_PRESETS, draw_motion, shepp_logan, simulate_acquisition, synth_csm, zero_fill_recon

log = logging.getLogger("jsmoco")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_CHECK = 0, 2, 3, 4
MODES = ("joint", "fixed-csm", "fixed-motion", "zero-fill")
ARTIFACTS = ("x_true", "csm_true", "phi_true", "m_true.csv", "plan", "y")

SIM_REQUIRED = ("height", "width", "coils", "shots", "accel")
SIM_DEFAULTS = {
    "poly_order": DEFAULT_POLY_ORDER,
    "csm_order": 3,
    "acs_lines": 8,
    "scheme": "equispaced",
    "ordering": "sequential",
    "noise_sigma": 0.0,
    "phase_strength": 0.5,
    "seed": 0,
    "sim_mode": "nufft",
}
COUNT_NOTE = (
    "basis x^p y^q with 0 <= p, q <= N has (N+1)^2 terms per coil and per real/imag part; "
    "a 2*c*N^2 count omits the degree-N row and column"
)
GAMMA_POLICY = "gamma_t = gamma_scale * sigma_t; likelihood variance gamma_t^2 + noise_sigma^2 for x, m and phi"


class ConfigError(ValueError):
    pass


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _prepare_dir(path: Path, force: bool, marker: str) -> None:
    if (path / marker).exists() and not force:
        raise ConfigError(f"{path} already holds results ({marker}); pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def simulation_config(raw: dict) -> dict:
    """Validate a simulation config and fill defaults; raises ``ConfigError`` naming the bad field."""
    missing = [k for k in SIM_REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"simulation config: missing required field(s) {missing}")
    cfg = {**SIM_DEFAULTS, **raw}
    if "motion_preset" in cfg:
        preset = cfg.pop("motion_preset")
        if preset not in MOTION_PRESETS:
            raise ConfigError(f"simulation config: motion_preset must be one of {sorted(MOTION_PRESETS)}")
        cfg["k_theta"], cfg["k_t"] = MOTION_PRESETS[preset]
        cfg["motion_preset"] = preset
    for key in ("k_theta", "k_t"):
        if key not in cfg:
            raise ConfigError(f"simulation config: missing required field {key!r} (or motion_preset)")
    known = set(SIM_REQUIRED) | set(SIM_DEFAULTS) | {"k_theta", "k_t", "motion_preset"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ConfigError(f"simulation config: unknown field(s) {unknown}")
    for key in ("height", "width", "coils", "shots", "poly_order", "csm_order", "acs_lines", "seed"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 0:
            raise ConfigError(f"simulation config: {key} must be a non-negative integer")
    for key in ("accel", "k_theta", "k_t", "noise_sigma", "phase_strength"):
        if not isinstance(cfg[key], (int, float)) or cfg[key] < 0:
            raise ConfigError(f"simulation config: {key} must be a non-negative number")
    if cfg["sim_mode"] not in ("nufft", "dft"):
        raise ConfigError("simulation config: sim_mode must be 'nufft' or 'dft'")
    return cfg


def write_motion_csv(path, m: MotionParams) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shot", "theta_rad", "theta_deg", "tx", "ty"])
        for j, (th, (tx, ty)) in enumerate(zip(m.rotations, m.translations)):
            w.writerow([j, repr(float(th)), repr(float(np.degrees(th))), repr(float(tx)), repr(float(ty))])


def read_motion_csv(path) -> MotionParams:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FormatError(f"{path}: no motion rows")
    arr = np.array([[float(r["theta_rad"]), float(r["tx"]), float(r["ty"])] for r in rows])
    return MotionParams.from_array(arr)


def save_phi(path, phi: PolyCoeffs) -> None:
    save_grid(phi.complex_coeffs(), path, "csm-coeffs", num_coils=phi.num_coils, poly_order=phi.order, basis=phi.basis)


def load_phi(path) -> PolyCoeffs:
    cc, hdr = load_grid(path, with_header=True)
    return PolyCoeffs.from_complex(cc.reshape(hdr["num_coils"], -1), hdr.get("basis", "monomial"))


def load_plan(run: Path) -> AcquisitionPlan:
    return AcquisitionPlan.from_header(read_header(run / "plan")["plan"])


def _versions() -> dict:
    return {
        "jsmoco": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
    }


def cmd_simulate(args) -> int:
    cfg = simulation_config(_read_json(args.config))
    if args.seed is not None:
        cfg["seed"] = args.seed
    run = Path(args.run_dir)
    _prepare_dir(run, args.force, "manifest.json")
    h, w, c = cfg["height"], cfg["width"], cfg["coils"]
    seed = cfg["seed"]
    try:
        plan = make_plan(h, w, cfg["accel"], cfg["acs_lines"], cfg["scheme"], cfg["shots"], cfg["ordering"], seed)
        x_true = shepp_logan(h, w, cfg["phase_strength"])
        maps, phi_true = synth_csm(c, h, w, cfg["csm_order"], seed)
        m_true = draw_motion(cfg["shots"], cfg["k_theta"], cfg["k_t"], seed)
    except ValueError as exc:
        raise ConfigError(f"simulation config: {exc}") from exc
    y = simulate_acquisition(x_true, phi_true, m_true, plan, cfg["noise_sigma"], seed, mode=cfg["sim_mode"])

    save_grid(x_true, run / "x_true", "image")
    save_grid(maps, run / "csm_true", "csm")
    save_phi(run / "phi_true", phi_true)
    write_motion_csv(run / "m_true.csv", m_true)
    save_grid(plan.mask.astype(np.complex128), run / "plan", "mask", plan=plan.header())
    save_grid(y.samples, run / "y", "measurements")
    n = cfg["poly_order"]
    manifest = {
        "command": "simulate",
        "config": cfg,
        "artifacts": list(ARTIFACTS),
        "csm_model": {
            "poly_order": n,
            "coefficient_count": coefficient_count(c, n),
            "coefficient_formula": "2*c*(N+1)^2",
            "count_note": COUNT_NOTE,
            "true_order": cfg["csm_order"],
            "true_coefficient_count": coefficient_count(c, cfg["csm_order"]),
        },
        "motion_presets": {k: {"k_theta_deg": v[0], "k_t_px": v[1]} for k, v in MOTION_PRESETS.items()},
        "effective_accel": plan.effective_accel,
        "num_samples": plan.num_samples,
        "nufft": DEFAULT_OPTIONS.metadata(),
        "gamma_policy": GAMMA_POLICY,
        "versions": _versions(),
    }
    _write_json(run / "manifest.json", manifest)
    log.info("simulated %s (%d samples, R_eff=%.3f)", run, plan.num_samples, plan.effective_accel)
    return EXIT_OK


def recon_settings(path) -> tuple[dict, dict]:
    """``(sampler_fields, prior_cfg)`` from a recon config with optional ``sampler``/``prior`` objects."""
    if path is None:
        return {}, {"kind": "smoothness"}
    raw = _read_json(path)
    unknown = sorted(set(raw) - {"sampler", "prior"})
    if unknown:
        raise ConfigError(f"recon config: unknown top-level field(s) {unknown}")
    return dict(raw.get("sampler", {})), dict(raw.get("prior", {"kind": "smoothness"}))


def _load_run(run: Path):
    for name in ("x_true", "plan", "y", "phi_true"):
        if not Path(f"{run / name}.hdr.json").exists():
            raise ConfigError(f"{run}: missing artifact {name!r}; run `jsmoco simulate` first")
    if not (run / "m_true.csv").exists():
        raise ConfigError(f"{run}: missing artifact 'm_true.csv'")
    return load_plan(run), Measurements(load_grid(run / "y", with_header=False))


def _record_timing(run: Path, mode: str, seconds: float) -> None:
    path = run / "recon" / "timings.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    data[mode] = seconds
    _write_json(path, data)


def cmd_recon(args) -> int:
    run = Path(args.run_dir)
    plan, y = _load_run(run)
    out = run / "recon" / args.mode
    if out.exists():
        if not args.force:
            raise ConfigError(f"{out} exists; pass --force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True)
    t0 = time.perf_counter()
    if args.mode == "zero-fill":
        save_grid(zero_fill_recon(y, plan), out / "x_est", "image")
        _record_timing(run, args.mode, time.perf_counter() - t0)
        return EXIT_OK

    fields_, prior_cfg = recon_settings(args.config)
    if args.seed is not None:
        fields_["seed"] = args.seed
    if args.trace_every is not None:
        fields_["trace_every"] = args.trace_every
    if args.deterministic:
        fields_["deterministic"] = True
    init = {}
    x_true = load_grid(run / "x_true")
    if args.mode == "fixed-csm":
        phi_true = load_phi(run / "phi_true")
        fields_.update(update_phi=False, poly_order=phi_true.order, csm_basis=phi_true.basis)
        init["phi_init"] = phi_true
    elif args.mode == "fixed-motion":
        fields_["update_m"] = False
        init["m_init"] = read_motion_csv(run / "m_true.csv")
    try:
        cfg = SamplerConfig.from_dict(fields_)
        prior = prior_from_config(prior_cfg, x_star=x_true)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"recon config: {exc}") from exc

    try:
        x, m, phi, trace = sample_joint(y, plan, prior, cfg, **init)
    except SamplerDivergence as exc:
        exc.trace.write_csv(out / "trace.csv")
        log.error("%s", exc)
        return EXIT_DIVERGED
    save_grid(x, out / "x_est", "image")
    write_motion_csv(out / "m_est.csv", m)
    save_phi(out / "phi_est", phi)
    trace.write_csv(out / "trace.csv")
    _write_json(
        out / "recon.json",
        {
            "mode": args.mode,
            "sampler": cfg.to_dict(),
            "prior": prior_cfg,
            "total_updates": cfg.total_updates,
            "coefficient_count": coefficient_count(phi.num_coils, phi.order),
            "gamma_policy": GAMMA_POLICY,
            "nufft": cfg.nufft_options.metadata(),
            "versions": _versions(),
        },
    )
    _record_timing(run, args.mode, time.perf_counter() - t0)
    return EXIT_OK


def _profile_csv(path, true_cut, est_cut, axis: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([axis, "true", "estimate"])
        for i, (a, b) in enumerate(zip(true_cut, est_cut)):
            w.writerow([i, repr(float(a)), repr(float(b))])


def cmd_eval(args) -> int:
    run = Path(args.run_dir)
    recon = run / "recon"
    modes = [m for m in MODES if Path(f"{recon / m / 'x_est'}.hdr.json").exists()]
    if not modes:
        raise ConfigError(f"{run}: no reconstructions found under {recon}")
    x_true = load_grid(run / "x_true")
    phi_true = load_phi(run / "phi_true")
    m_true = read_motion_csv(run / "m_true.csv")
    manifest = json.loads((run / "manifest.json").read_text()) if (run / "manifest.json").exists() else {}
    sim = manifest.get("config", {})
    timings = json.loads((recon / "timings.json").read_text()) if (recon / "timings.json").exists() else {}
    h, w = x_true.shape
    header = ["run_id", "mode", "R", "k_theta", "k_t", "psnr", "ssim", "csm_nrmse", "rmse_theta", "rmse_t",
              "wall_time"]
    rows = []
    for mode in modes:
        x_est = load_grid(recon / mode / "x_est")
        row = {
            "run_id": run.name,
            "mode": mode,
            "R": sim.get("accel", ""),
            "k_theta": sim.get("k_theta", ""),
            "k_t": sim.get("k_t", ""),
            "psnr": psnr(x_true, x_est),
            "ssim": ssim(x_true, x_est),
            "csm_nrmse": "",
            "rmse_theta": "",
            "rmse_t": "",
            "wall_time": timings.get(mode, ""),
        }
        if Path(f"{recon / mode / 'phi_est'}.hdr.json").exists():
            row["csm_nrmse"] = csm_nrmse(load_phi(recon / mode / "phi_est"), phi_true, h, w)
        if (recon / mode / "m_est.csv").exists():
            row["rmse_theta"], row["rmse_t"] = motion_error(read_motion_csv(recon / mode / "m_est.csv"), m_true)
        rows.append(row)
        rt, ct = line_profiles(x_true)
        re_, ce = line_profiles(x_est)
        _profile_csv(run / f"profile_row_{mode}.csv", rt, re_, "col")
        _profile_csv(run / f"profile_col_{mode}.csv", ct, ce, "row")
    with open(run / "metrics.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=header)
        wr.writeheader()
        wr.writerows(rows)
    _write_json(run / "metrics_meta.json", {"image_metrics": "magnitude", "csm_metric": "complex, gauge aligned",
                                             "ssim": SSIM_DEFAULTS})
    for row in rows:
        log.info("%s: psnr=%.2f ssim=%.4f", row["mode"], row["psnr"], row["ssim"])
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest(seed=args.seed or 0, perturb_adjoint=args.perturb_adjoint)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jsmoco", description="Joint motion / coil / image reconstruction tools.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("--version", action="version", version=f"jsmoco {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.add_argument("--deterministic", action="store_true", help="single-threaded, bit-reproducible run")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    s = sub.add_parser("simulate", help="write a synthetic run directory")
    s.add_argument("run_dir")
    s.add_argument("--config", required=True, help="simulation JSON config")
    common(s)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("recon", help="reconstruct a simulated run")
    r.add_argument("run_dir")
    r.add_argument("--config", default=None, help="recon JSON config with 'sampler' and 'prior' objects")
    r.add_argument("--mode", choices=MODES, default="joint")
    r.add_argument("--trace-every", type=int, default=None, help="trace row every K updates")
    common(r)
    r.set_defaults(func=cmd_recon)

    e = sub.add_parser("eval", help="metrics and line profiles for every reconstruction")
    e.add_argument("run_dir")
    common(e)
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("selftest", help="adjoint, NUFFT and gradient checks")
    t.add_argument("--perturb-adjoint", type=float, default=0.0, help=argparse.SUPPRESS)
    common(t)
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    if args.deterministic:
        os.environ["JSMOCO_THREADS"] = "1"
    try:
        return args.func(args)
    except (ConfigError, FormatError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
