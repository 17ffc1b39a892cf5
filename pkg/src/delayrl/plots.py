"""Figure rendering for the report path.

PNG files land next to the delimited output they visualize. Everything
renders through the Agg backend so headless runs work.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_delay_histogram(delays, path, title="Sampled delay distribution"):
    fig, ax = plt.subplots(figsize=(6, 4))
    if delays:
        lo, hi = min(delays), max(delays)
        values = list(range(lo, hi + 1))
        counts = [0] * len(values)
        for d in delays:
            counts[d - lo] += 1
        ax.bar(values, counts, width=0.9, color="tab:blue")
    ax.set_xlabel("delay (steps)")
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_delay_series(delays, path, title="Sampled delay over time"):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(range(len(delays)), delays, lw=0.8, color="tab:blue")
    ax.set_xlabel("step")
    ax.set_ylabel("delay (steps)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_learning_curve(points, path, title="Evaluation during training"):
    """``points`` are (after_episode, mean, std) triples."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if points:
        xs = [p[0] for p in points]
        means = [p[1] for p in points]
        stds = [p[2] for p in points]
        ax.plot(xs, means, marker="o", color="tab:green")
        ax.fill_between(xs,
                        [m - s for m, s in zip(means, stds)],
                        [m + s for m, s in zip(means, stds)],
                        alpha=0.25, color="tab:green")
    ax.set_xlabel("training episode")
    ax.set_ylabel("mean return")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_return_series(returns, path, title="Per-episode return"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(returns)), returns, marker=".", lw=0.8, color="tab:orange")
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
