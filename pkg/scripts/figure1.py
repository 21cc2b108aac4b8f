"""Threshold EXP3, EXP3 SET and EXP3.SC on a fixed 5-clique graph with K=25."""

from _common import print_table, sweep_from_config

if __name__ == "__main__":
    for _, res in sweep_from_config("figure1", __doc__):
        print_table(res.rows)
