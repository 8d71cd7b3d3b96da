"""Optional figure rendering for CLI time series (PNG next to the CSV)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_projective_series(rows, path):
    """Angles of the transported planes and the cross-ratio growth."""
    ts = [r.t for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(ts, [r.theta_plus for r in rows], label="theta_plus")
    ax1.plot(ts, [r.theta_minus for r in rows], label="theta_minus")
    ax1.set_ylabel("angle (rad)")
    ax1.legend()
    crs = [r.cr for r in rows]
    ax2.plot(ts, crs, label="cross-ratio")
    if all(c > 0 for c in crs):
        ax2.set_yscale("log")
    ax2.set_xlabel("t")
    ax2.set_ylabel("[d+(0), d+(t), d-(t), d-(0)]")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rotation_profile(profile, path):
    """Unwrapped plane angle along the orbit."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(profile.times, profile.angles)
    ax.axhline(profile.angles[len(profile.angles) // 2], color="gray",
               linewidth=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("unwrapped angle (rad)")
    ax.set_title(f"total variation {profile.total_variation:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
