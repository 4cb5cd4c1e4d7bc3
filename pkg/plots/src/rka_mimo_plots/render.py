"""Figure renderers: one validated table in, one static image out."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .io import SchemaError, Table, read_table  # noqa: E402

STYLE_FILE = Path(__file__).parent / "default.mplstyle"

# default trade-off thresholds drawn on fig5 when the table metadata
# does not carry its own (threshold_t95 / threshold_t333 keys)
FIG5_THRESHOLDS = {"threshold_t95": 139, "threshold_t333": 255}


def render_figure(fig_id: int, csv_path, out_path) -> Path:
    """Validate ``csv_path`` against the schema for figure ``fig_id`` and
    write the rendered image to ``out_path``."""
    renderers = {1: _fig1, 2: _fig2, 3: _fig3, 4: _fig4, 5: _fig5}
    if fig_id not in renderers:
        raise SchemaError(f"no renderer for figure {fig_id}")
    table = read_table(csv_path, f"fig{fig_id}")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with plt.style.context(str(STYLE_FILE)):
        fig = renderers[fig_id](table)
        # strip variable metadata so identical inputs give identical bytes
        fig.savefig(out_path, metadata=_stable_metadata(out_path))
        plt.close(fig)
    return out_path


def _stable_metadata(out_path):
    suffix = Path(out_path).suffix.lower()
    if suffix == ".png":
        return {"Software": "rka-mimo-plots"}
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None, "Producer": None, "Creator": None}
    return None


def _fig1(table: Table):
    """Empirical CDFs of the row-sampling probabilities."""
    fig, ax = plt.subplots()
    for est, corr, alpha in table.groups("estimator", "correlation", "alpha"):
        rows = table.select(estimator=est, correlation=corr, alpha=alpha)
        p = [r[3] for r in rows]
        cdf = [r[4] for r in rows]
        ax.plot(p, cdf, label=f"{est}, {corr}, $\\alpha$={alpha:g}")
    ax.set_xscale("log")
    ax.set_xlabel("sampling probability $p_r$")
    ax.set_ylabel("empirical CDF")
    ax.set_title("Row-sampling probability distribution")
    ax.legend()
    return fig


def _fig2(table: Table):
    """Average spectral efficiency vs iteration count, with the exact
    regularized zero-forcing value as a reference line."""
    fig, ax = plt.subplots()
    refs = set()
    for init, est, corr in table.groups("init", "estimator", "correlation"):
        rows = table.select(init=init, estimator=est, correlation=corr)
        t = [r[3] for r in rows]
        se = [r[4] for r in rows]
        err = [r[5] for r in rows]
        ax.errorbar(t, se, yerr=err, marker="o", capsize=2,
                    label=f"{init}, {est}, {corr}")
        refs.update(r[6] for r in rows)
    for ref in sorted(refs):
        ax.axhline(ref, color="k", linestyle="--", linewidth=1.0)
    if refs:
        ax.plot([], [], color="k", linestyle="--", label="RZF reference")
    ax.set_xlabel("iterations $T$")
    ax.set_ylabel("average SE per UE [bit/s/Hz]")
    ax.set_title("Spectral efficiency vs iteration budget")
    ax.legend()
    return fig


def _fig3(table: Table):
    """Relative SE gap vs iterations per loading factor and correlation."""
    fig, ax = plt.subplots()
    for loading, est, corr in table.groups("loading", "estimator", "correlation"):
        rows = table.select(loading=loading, estimator=est, correlation=corr)
        t = [r[3] for r in rows]
        gap = [r[4] for r in rows]
        ax.plot(t, gap, marker="o", label=f"K/M={loading:g}, {est}, {corr}")
    ax.set_yscale("log")
    ax.set_xlabel("iterations $T$")
    ax.set_ylabel("SE gap to RZF [%]")
    ax.set_title("Convergence of the SE gap")
    ax.legend()
    return fig


def _fig4(table: Table):
    """Gap curves across the correlation-strength and shadowing sweeps."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.2), sharey=True)
    titles = {"a": "antenna correlation sweep ($\\sigma$=0)",
              "b": "shadowing sweep ($r$=0)"}
    for ax, panel in zip(axes, ("a", "b")):
        for _, r, sigma in table.groups("panel", "r", "sigma"):
            rows = table.select(panel=panel, r=r, sigma=sigma)
            if not rows:
                continue
            t = [row[3] for row in rows]
            gap = [row[4] for row in rows]
            label = f"r={r:g}" if panel == "a" else f"$\\sigma$={sigma:g} dB"
            ax.plot(t, gap, marker="o", label=label)
        ax.set_yscale("log")
        ax.set_xlabel("iterations $T$")
        ax.set_title(titles.get(panel, panel))
        ax.legend()
    axes[0].set_ylabel("SE gap to RZF [%]")
    return fig


def _fig5(table: Table):
    """Iteration upper-bound frontier over the array size, with the
    trade-off threshold antenna counts marked."""
    fig, ax = plt.subplots()
    for (loading,) in table.groups("loading"):
        rows = table.select(loading=loading)
        m = [r[1] for r in rows]
        ax.plot(m, [r[3] for r in rows], marker="",
                label=f"RZF match, K/M={loading:g}")
        ax.plot(m, [r[4] for r in rows], marker="", linestyle=":",
                label=f"ZF match, K/M={loading:g}")
    for key, default in FIG5_THRESHOLDS.items():
        m_star = float(table.metadata.get(key, default))
        ax.axvline(m_star, color="k", linestyle="--", linewidth=1.0)
        ax.annotate(f"M={m_star:g}", (m_star, ax.get_ylim()[1]),
                    textcoords="offset points", xytext=(3, -12), fontsize=8)
    ax.set_yscale("log")
    ax.set_xlabel("antennas $M$")
    ax.set_ylabel("break-even iteration budget $T$")
    ax.set_title("Complexity trade-off frontier")
    ax.legend()
    return fig
