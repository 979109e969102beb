"""Render the CSV outputs of ``epfkit`` as PNG figures.

Kept out of the core CLI: ``epfkit-plot DIR`` reads whatever tables it finds in
``DIR`` and writes images next to them.  Nothing else in the package imports
matplotlib.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .barycentric import DEFAULT_CORNERS, from_barycentric  # noqa: E402
from .output import read_csv  # noqa: E402
from .perturbation import PerturbationSpec, perturb  # noqa: E402
from .trajectory import plane_strain_stress  # noqa: E402

# map contrast drawn on the baseline locus
_LOCUS_SPECS = (
    PerturbationSpec("2C", 0.5, "production_min"),
    PerturbationSpec("1C", 1.0, "production_min", 0.5),
)

__all__ = ["plot_directory", "main"]


def _table(path):
    header, data = read_csv(path)
    return {name: data[:, i] for i, name in enumerate(header)}


def _triangle(ax):
    c = DEFAULT_CORNERS
    pts = np.array([c.x1c, c.x2c, c.x3c, c.x1c])
    ax.plot(pts[:, 0], pts[:, 1], color="0.3", lw=1)
    for name, p in (("1C", c.x1c), ("2C", c.x2c), ("3C", c.x3c)):
        ax.annotate(name, p, textcoords="offset points", xytext=(0, 4), ha="center")
    ax.set_aspect("equal")
    ax.set_axis_off()


def plot_trajectory(path: Path) -> Path:
    t = _table(path)
    fig, (ax_b, ax_a) = plt.subplots(1, 2, figsize=(9, 4))
    _triangle(ax_b)
    ax_b.plot(t["bary_x"], t["bary_y"], "o-", ms=3)
    ax_b.set_title("barycentric map")
    # the Lumley map is drawn with -II upward
    ax_a.plot(t["III"], -t["II"], "o-", ms=3)
    ax_a.set_xlabel("III")
    ax_a.set_ylabel("-II")
    ax_a.set_title("invariant map")
    fig.tight_layout()
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def _locus(ax, baseline):
    """Baseline cells and their images under the perturbation map.

    A 1D shear layer is in plane strain, so each cell is rebuilt from the
    largest anisotropy eigenvalue at its map position.
    """
    pts = np.column_stack([baseline["bary_x"], baseline["bary_y"]])
    s = from_barycentric(pts)[:, 0]
    tau = np.stack([plane_strain_stress(v) for v in s])
    ax.plot(pts[:, 0], pts[:, 1], "k.", ms=3, label="baseline")
    for spec in _LOCUS_SPECS:
        q = perturb(tau, spec).bary_after
        ax.plot(q[:, 0], q[:, 1], ".", ms=3, label=spec.label)


def _dns(manifest_path, override):
    if override is not None:
        return override
    if manifest_path.is_file():
        cases = json.loads(manifest_path.read_text()).get("cases", {})
        path = cases.get("dns_overlay", {}).get("path")
        if path:
            return Path(path)
    return None


def plot_channel(directory: Path, dns: Path | None = None) -> list[Path]:
    written = []
    profiles = sorted(directory.glob("profile_*.csv"))
    if profiles:
        fig, (ax_u, ax_b) = plt.subplots(1, 2, figsize=(11, 4.5))
        for p in profiles:
            t = _table(p)
            label = p.stem.removeprefix("profile_")
            style = dict(color="k", lw=2) if label == "baseline" else dict(lw=1)
            ax_u.semilogx(t["y_plus"], t["u_plus"], label=label, **style)
            if label == "baseline":
                _locus(ax_b, t)
        dns = _dns(directory / "manifest.json", dns)
        if dns is not None and dns.is_file():
            d = _table(dns)
            ax_u.semilogx(d["y_plus"], d["u_plus"], "k--", lw=1, label="reference")
        ax_u.set_xlabel("y+")
        ax_u.set_ylabel("u+")
        ax_u.legend(fontsize=6)
        _triangle(ax_b)
        ax_b.legend(fontsize=6, loc="upper left")
        fig.tight_layout()
        out = directory / "profiles.png"
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)
    for env_path in sorted(directory.glob("envelope_*.csv")):
        t = _table(env_path)
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        ax.fill_between(t["y_plus"], t["u_min"], t["u_max"], alpha=0.3, label="envelope")
        ax.semilogx(t["y_plus"], t["baseline"], "k", label="baseline")
        ax.set_xlabel("y+")
        ax.set_ylabel("u+")
        ax.set_title(env_path.stem.removeprefix("envelope_"))
        ax.legend()
        fig.tight_layout()
        out = env_path.with_suffix(".png")
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)
    return written


def plot_directory(directory, dns=None) -> list[Path]:
    directory = Path(directory)
    written = [plot_trajectory(p) for p in sorted(directory.glob("trajectory_*.csv"))]
    written += plot_channel(directory, Path(dns) if dns else None)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="epfkit-plot", description="render epfkit CSV tables as PNG")
    parser.add_argument("directory", type=Path)
    parser.add_argument("--dns", type=Path, help="reference profile CSV with y_plus,u_plus columns")
    args = parser.parse_args(argv)
    if not args.directory.is_dir():
        print(f"epfkit-plot: not a directory: {args.directory}", file=sys.stderr)
        return 2
    written = plot_directory(args.directory, args.dns)
    for p in written:
        print(f"wrote {p}")
    if not written:
        print("epfkit-plot: no tables found", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
