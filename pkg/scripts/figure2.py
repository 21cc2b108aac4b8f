"""Threshold EXP3 against Batch EXP3 under bandit feedback, K=5."""

from _common import print_table, sweep_from_config

if __name__ == "__main__":
    for _, res in sweep_from_config("figure2", __doc__):
        print_table(res.rows)
