"""Pre/post survey analysis: paired t-test over synthetic Likert scores.

The same computation backs the `cipherschool analyze` subcommand.
"""

import random

from cipherschool.stats import PairedSample, paired_t_test

rng = random.Random(17)
pre = [rng.randint(1, 3) for _ in range(15)]
post = [min(5, score + rng.randint(1, 2)) for score in pre]

print("pre: ", pre)
print("post:", post)

result = paired_t_test(PairedSample.of(pre, post))
print(f"\nt = {result.t:.4f}, df = {result.df}, two-tailed p = {result.p:.3e}")
if result.p < 0.05:
    print("The jump in scores is very unlikely to be chance.")
