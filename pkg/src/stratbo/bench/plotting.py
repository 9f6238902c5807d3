"""Static figures rendered to files (Agg backend, no display needed)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"sbo": "tab:blue", "kg": "tab:orange", "ei": "tab:green"}
LABELS = {"sbo": "SBO", "kg": "KG", "ei": "EI"}


def plot_curves(points, path, title=""):
    """Mean G(recommendation) per iteration with 95% bands, one line per algorithm."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for algo in sorted({p.algorithm for p in points}, key=lambda a: list(COLORS).index(a) if a in COLORS else 9):
        pts = sorted((p for p in points if p.algorithm == algo), key=lambda p: p.iteration)
        it = np.array([p.iteration for p in pts])
        m = np.array([p.mean for p in pts])
        hw = np.array([p.half_width for p in pts])
        n = pts[-1].count if pts else 0
        ax.plot(it, m, color=COLORS.get(algo), label=f"{LABELS.get(algo, algo)} (n={n})")
        ax.fill_between(it, m - hw, m + hw, color=COLORS.get(algo), alpha=0.2, linewidth=0)
    ax.set_xlabel("samples beyond the first stage")
    ax.set_ylabel("G(recommendation)")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(summary, path):
    """Normalized SBO-vs-KG difference against log beta, one line per A."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for A in sorted({s["A_ratio"] for s in summary}):
        pts = sorted((s for s in summary if s["A_ratio"] == A), key=lambda s: s["log_beta"])
        x = np.array([s["log_beta"] for s in pts])
        m = np.array([s["mean_norm_diff"] for s in pts])
        lo = np.array([s["ci_low"] for s in pts])
        hi = np.array([s["ci_high"] for s in pts])
        ax.errorbar(x, m, yerr=[m - lo, hi - m], marker="o", capsize=3, label=f"A = {A:g}")
    ax.axhline(0.0, color="0.5", linewidth=0.8)
    ax.set_xlabel("log beta")
    ax.set_ylabel("normalized difference (SBO - KG) / |KG|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
