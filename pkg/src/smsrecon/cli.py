"""Operator-facing command line: simulate, calibrate, recon, eval.

Every artifact-producing run writes exactly one ``manifest.json`` with the
resolved configuration, input/output paths, seed and timings; re-running a
deterministic method from its manifest reproduces the outputs bitwise.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
abort.  ``SMS_THREADS`` caps the linear-algebra thread pools.
"""

from __future__ import annotations

import json
import os
import time
from contextlib import nullcontext
from importlib import metadata as importlib_metadata
from pathlib import Path

import click
import numpy as np

from . import baselines, data_io, grappa, metrics
from . import operators as ops
from . import sampler as smp
from . import simulate as sim
from .config import METHODS, ReconConfig, SimulateConfig
from .errors import ConfigError, DataFormatError, NumericalError

EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 2, 3, 4


def _version() -> str:
    try:
        return importlib_metadata.version("smsrecon")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


def _load_config_dict(path) -> dict:
    try:
        return data_io.read_json(path)
    except DataFormatError as exc:
        raise ConfigError(str(exc)) from exc


def _write_manifest(out_dir: Path, payload: dict) -> Path:
    path = out_dir / "manifest.json"
    payload = dict(payload, version=_version())
    data_io.write_json(payload, path)
    return path


def _save_png(array: np.ndarray, path: Path) -> None:
    from PIL import Image

    Image.fromarray(array, mode="L").save(path)


def _plot_curve(values, ylabel: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(values)
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


@click.group()
def cli():
    """Multiband MRI reconstruction toolkit."""


# ---------------------------------------------------------------------------
# simulate


def _phantom_stack(cfg: SimulateConfig) -> np.ndarray:
    ellipses = None
    if cfg.ellipses is not None:
        ellipses = [
            sim.Ellipse(
                center=tuple(e["center"]),
                axes=tuple(e["axes"]),
                angle=float(e.get("angle", 0.0)),
                amplitude=complex(*e["amplitude"])
                if isinstance(e.get("amplitude"), (list, tuple))
                else complex(e.get("amplitude", 1.0)),
            )
            for e in cfg.ellipses
        ]
    slices = []
    for s in range(cfg.mb):
        spec = sim.PhantomSpec(
            h=cfg.h,
            w=cfg.w,
            ellipses=ellipses,
            phase_coeffs=cfg.phase_coeffs,
            seed=(cfg.seed * 1_000_003 + s) % 2**63,
        )
        slices.append(sim.make_phantom(spec))
    return np.stack(slices)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out-dir", default=".", type=click.Path())
def simulate(config_path, seed, out_dir):
    """Generate truth, coil maps, collapsed measurement, and calibration."""
    t0 = time.perf_counter()
    raw = _load_config_dict(config_path)
    if seed is not None:
        raw["seed"] = seed
    cfg = SimulateConfig.from_dict(raw)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    stack = _phantom_stack(cfg)
    maps = sim.make_coil_maps(
        cfg.c, cfg.mb, cfg.h, cfg.w, seed=(cfg.seed * 1_000_003 + 999_983) % 2**63
    )
    acq = sim.AcquisitionSpec(
        mb=cfg.mb,
        r=cfg.r,
        caipi=np.asarray(cfg.caipi, dtype=float) if cfg.caipi is not None else None,
        acs_width=cfg.acs_width,
        noise_sigma=cfg.noise_sigma,
        calib_size=cfg.calib_size,
        calib_gamma=cfg.calib_gamma,
    )
    meas = sim.simulate_sms(stack, maps, acq, seed=(cfg.seed * 1_000_003 + 13) % 2**63)
    calib = sim.simulate_calibration(stack, maps, cfg.calib_size, gamma=cfg.calib_gamma)

    outputs = {
        "truth": str(out / "truth.smsc"),
        "maps": str(out / "maps.smsc"),
        "measurement": str(out / "measurement.smsc"),
        "calibration": str(out / "calibration.smsc"),
        "sidecar": str(out / "measurement.json"),
    }
    data_io.write_array(stack, outputs["truth"])
    data_io.write_array(maps, outputs["maps"])
    data_io.write_array(meas.data, outputs["measurement"])
    data_io.write_array(calib, outputs["calibration"])
    data_io.write_json(
        {
            "h": cfg.h,
            "w": cfg.w,
            "c": cfg.c,
            "mb": cfg.mb,
            "r": cfg.r,
            "caipi": list(acq.shifts(cfg.w)),
            "mb_offset": meas.pattern.mb_offset,
            "r_offset": meas.pattern.r_offset,
            "acs_width": cfg.acs_width,
            "noise_sigma": cfg.noise_sigma,
            "calib_size": cfg.calib_size,
        },
        outputs["sidecar"],
    )
    _write_manifest(
        out,
        {
            "subcommand": "simulate",
            "config": cfg.to_dict(),
            "seed": cfg.seed,
            "inputs": {"config": str(config_path)},
            "outputs": outputs,
            "timings": {"total_s": time.perf_counter() - t0},
        },
    )
    click.echo(f"wrote {', '.join(sorted(outputs))} to {out}")


# ---------------------------------------------------------------------------
# shared input loading


def _load_instance(in_dir: Path):
    sidecar = data_io.read_json(in_dir / "measurement.json")
    maps = data_io.read_array(in_dir / "maps.smsc").astype(np.complex128)
    y = data_io.read_array(in_dir / "measurement.smsc").astype(np.complex128)
    pattern = ops.make_pattern(
        sidecar["mb"],
        sidecar["r"],
        y.shape[-2:],
        mb_offset=sidecar.get("mb_offset", 0),
        r_offset=sidecar.get("r_offset", 0),
        acs_width=sidecar.get("acs_width", 0),
    )
    meas = ops.Measurement(y, pattern, noise_sigma=sidecar.get("noise_sigma", 0.0))
    calib_path = in_dir / "calibration.smsc"
    calibration = (
        data_io.read_array(calib_path).astype(np.complex128) if calib_path.exists() else None
    )
    return sidecar, maps, meas, calibration


def _merge_recon_config(config_path, overrides: dict, sidecar: dict) -> ReconConfig:
    raw = _load_config_dict(config_path) if config_path else {}
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    for key in ("mb", "r"):
        if key in raw and raw[key] is not None and raw[key] != sidecar[key]:
            raise ConfigError(
                f"config {key}={raw[key]} conflicts with measurement {key}={sidecar[key]}"
            )
        raw[key] = sidecar[key]
    if raw.get("caipi") is None:
        raw["caipi"] = sidecar["caipi"]
    return ReconConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# calibrate


@cli.command()
@click.option("--in-dir", default=".", type=click.Path(), help="Directory with simulate outputs.")
@click.option("--out-dir", default=None, type=click.Path())
@click.option("--tikhonov", type=float, default=1e-4, show_default=True)
def calibrate(in_dir, out_dir, tikhonov):
    """Fit interpolation kernels from the calibration scan and save them."""
    t0 = time.perf_counter()
    in_dir = Path(in_dir)
    out = Path(out_dir) if out_dir else in_dir
    out.mkdir(parents=True, exist_ok=True)
    sidecar, _, meas, calibration = _load_instance(in_dir)
    if calibration is None:
        raise ConfigError(f"no calibration.smsc in {in_dir}")
    shifts = np.asarray(sidecar["caipi"], dtype=float)
    calib_ext = grappa.reorder_calibration(calibration, shifts)
    row_k, col_k = grappa.calibrate_for_pattern(calib_ext, meas.pattern, tikhonov=tikhonov)

    outputs = {"kernels": str(out / "kernels.json")}
    info: dict = {"tikhonov": tikhonov}
    for tag, kernel in (("row", row_k), ("col", col_k)):
        if kernel is None:
            continue
        path = out / f"kernel_{tag}.smsc"
        data_io.write_array(kernel.weights, path)
        outputs[f"kernel_{tag}"] = str(path)
        geo = kernel.geometry
        info[tag] = {
            "axis": geo.axis,
            "factor": geo.factor,
            "n_src": geo.n_src,
            "n_orth": geo.n_orth,
            "orth_stride": geo.orth_stride,
            "residual": kernel.residual,
            "weights": str(path),
        }
    data_io.write_json(info, outputs["kernels"])
    _write_manifest(
        out,
        {
            "subcommand": "calibrate",
            "config": {"tikhonov": tikhonov},
            "seed": None,
            "inputs": {"in_dir": str(in_dir)},
            "outputs": outputs,
            "timings": {"total_s": time.perf_counter() - t0},
        },
    )
    click.echo(f"wrote kernels to {out}")


# ---------------------------------------------------------------------------
# recon


def _run_method(cfg: ReconConfig, maps, meas, calibration):
    shifts = cfg.resolved_caipi(meas.pattern.mb, meas.data.shape[-1])
    if cfg.method == "roger":
        stack, diag = smp.roger_reconstruct(meas, maps, calibration, cfg)
        return stack, smp.run_report(diag)
    if cfg.method == "zerofill":
        stack = baselines.zero_filled(meas, maps, shifts)
        return stack, {"method": "zerofill"}
    if cfg.method == "cgsense":
        stack, log = baselines.cg_sense(meas, maps, shifts, iters=cfg.iters, tol=cfg.cg_tol)
        return stack, {
            "method": "cgsense",
            "residuals": log.trace(),
            "iterations": log.iterations,
            "stop_reason": log.stop_reason,
        }
    if cfg.method == "l1wavelet":
        stack, log = baselines.l1_wavelet(
            meas, maps, shifts, lam_w=cfg.l1_lambda, iters=cfg.iters, levels=cfg.wavelet_levels
        )
        return stack, {
            "method": "l1wavelet",
            "objective": log.trace(),
            "iterations": log.iterations,
            "stop_reason": log.stop_reason,
        }
    if cfg.method == "rograppa":
        if calibration is None:
            raise ConfigError("rograppa needs calibration.smsc next to the measurement")
        calib_ext = grappa.reorder_calibration(calibration, shifts)
        row_k, col_k = grappa.calibrate_for_pattern(
            calib_ext, meas.pattern, tikhonov=cfg.lfe_tikhonov
        )
        stack = grappa.rograppa_reconstruct(meas, maps, shifts, row_k, col_k)
        report = {"method": "rograppa"}
        if row_k is not None:
            report["row_residual"] = row_k.residual
        if col_k is not None:
            report["col_residual"] = col_k.residual
        return stack, report
    raise ConfigError(f"unknown method {cfg.method!r}")


@cli.command()
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--in-dir", default=".", type=click.Path(), help="Directory with simulate outputs.")
@click.option("--method", type=click.Choice(METHODS), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lfe-size", type=int, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--out-dir", default=".", type=click.Path())
@click.option("--png", is_flag=True, help="Also plot the residual/objective curve.")
def recon(config_path, in_dir, method, seed, lfe_size, lam, steps, out_dir, png):
    """Reconstruct a measurement; flags override config values."""
    t0 = time.perf_counter()
    in_dir = Path(in_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecar, maps, meas, calibration = _load_instance(in_dir)
    cfg = _merge_recon_config(
        config_path,
        {"method": method, "seed": seed, "lfe_size": lfe_size, "lambda": lam, "steps": steps},
        sidecar,
    )

    stack, report = _run_method(cfg, maps, meas, calibration)

    truth_path = in_dir / "truth.smsc"
    if truth_path.exists():
        truth = data_io.read_array(truth_path).astype(np.complex128)
        if truth.shape == stack.shape:
            report["metrics"] = metrics.evaluate_stacks(truth, stack).to_dict()

    outputs = {"recon": str(out / "recon.smsc"), "report": str(out / "report.json")}
    data_io.write_array(stack, outputs["recon"])
    report["elapsed_s"] = time.perf_counter() - t0
    data_io.write_json(report, outputs["report"])
    curve = report.get("residuals") or report.get("objective")
    if png and curve:
        curve_path = out / "curve.png"
        _plot_curve(curve, "residual" if "residuals" in report else "objective", curve_path)
        outputs["curve"] = str(curve_path)
    _write_manifest(
        out,
        {
            "subcommand": "recon",
            "config": cfg.to_dict(),
            "seed": cfg.seed,
            "inputs": {"in_dir": str(in_dir), "config": str(config_path) if config_path else None},
            "outputs": outputs,
            "timings": {"total_s": report["elapsed_s"]},
        },
    )
    if "metrics" in report:
        click.echo(
            f"{cfg.method}: psnr {report['metrics']['psnr_mean']:.2f} dB, "
            f"ssim {report['metrics']['ssim_mean']:.4f}"
        )
    else:
        click.echo(f"{cfg.method}: wrote {outputs['recon']}")


# ---------------------------------------------------------------------------
# eval


@cli.command("eval")
@click.argument("ref", type=click.Path())
@click.argument("test", type=click.Path())
@click.option("--out-dir", default=".", type=click.Path())
@click.option("--png", is_flag=True, help="Also write an 8-bit error map.")
def eval_cmd(ref, test, out_dir, png):
    """Compare two .smsc stacks and write a metrics report."""
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ref_arr = data_io.read_array(ref).astype(np.complex128)
    test_arr = data_io.read_array(test).astype(np.complex128)
    if ref_arr.shape != test_arr.shape:
        raise ConfigError(f"shape mismatch: {ref_arr.shape} vs {test_arr.shape}")
    report = metrics.evaluate_stacks(ref_arr, test_arr)
    outputs = {"metrics": str(out / "metrics.json")}
    data_io.write_json(report.to_dict(), outputs["metrics"])
    if png:
        err = metrics.error_map(np.abs(ref_arr), np.abs(test_arr))
        if err.ndim == 3:  # tile slices horizontally
            err = np.concatenate(list(err), axis=1)
        png_path = out / "error_map.png"
        _save_png(err, png_path)
        outputs["error_map"] = str(png_path)
    _write_manifest(
        out,
        {
            "subcommand": "eval",
            "config": {},
            "seed": None,
            "inputs": {"ref": str(ref), "test": str(test)},
            "outputs": outputs,
            "timings": {"total_s": time.perf_counter() - t0},
        },
    )
    click.echo(
        f"psnr {report.psnr_mean:.2f} dB, ssim {report.ssim_mean:.4f} "
        f"({len(report.psnr_db)} slices)"
    )


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    limit = os.environ.get("SMS_THREADS")
    try:
        if limit:
            from threadpoolctl import threadpool_limits

            context = threadpool_limits(limits=int(limit))
        else:
            context = nullcontext()
        with context:
            cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO
    except NumericalError as exc:
        click.echo(f"numerical abort: {exc}", err=True)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
