"""Fit the growth exponent of mean regret in T under bandit feedback."""

from _common import print_table, sweep_from_config

from graphsc.harness import fit_regret_exponent

if __name__ == "__main__":
    for spec, res in sweep_from_config("scaling", __doc__):
        print_table(res.rows)
        for pol in spec.policies:
            rows = [r for r in res.rows if r["policy"] == pol and not r.get("error")]
            fit = fit_regret_exponent([r["T"] for r in rows], [r["mean_regret"] for r in rows])
            print(f"{pol}: regret ~ T^{fit.slope:.3f} (r2 = {fit.r2:.4f})")
