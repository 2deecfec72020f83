"""Compare accuracy curves of scripted shell-game agents at several error rates.

An agent that errs with probability p on every query survives n swaps with
probability (1 - p) ** n; the measured curve should track that closely.
Run with::

    python demos/shell_game_curves.py
"""

from __future__ import annotations

from statler.shellgame import ShellRunConfig, accuracy_curve, oracle_backend, run_shell_suite

MAX_SWAPS = 7


def main() -> None:
    header = "kind     p     " + " ".join(f"  a({n})" for n in range(1, MAX_SWAPS + 1))
    print(header)
    for kind in ("vanilla", "cot", "state"):
        for p in (0.0, 0.1, 0.3):
            cfg = ShellRunConfig(num_episodes=400, max_swaps=MAX_SWAPS, demos=10, agent_kind=kind)
            curve = accuracy_curve(run_shell_suite(cfg, oracle_backend(kind, error_rate=p, seed=1)), MAX_SWAPS)
            row = " ".join(f"{curve.a[n]:6.3f}" for n in range(1, MAX_SWAPS + 1))
            print(f"{kind:8s} {p:.1f}  {row}")
        expected = " ".join(f"{(1 - 0.3) ** n:6.3f}" for n in range(1, MAX_SWAPS + 1))
        print(f"{'':8s} ref   {expected}   <- (1 - 0.3) ** n\n")


if __name__ == "__main__":
    main()
