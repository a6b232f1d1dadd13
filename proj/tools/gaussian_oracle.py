#!/usr/bin/env python3
"""Reference run of the vanilla-GAN Gaussian sanity check in PyTorch.

Same architecture, initialisation, optimiser, loss and clamp as the `gan`
preset; the random streams are PyTorch's own. Prints one line per seed and
the overall verdict (mean within 0.3 of (0.3, 0.3) for >= 3 of 5 seeds).
"""
import argparse
import sys

import torch
from torch import nn

FLOOR = 1e-7


def glorot(m):
    if isinstance(m, nn.Linear):
        nn.init.xavier_normal_(m.weight)
        nn.init.zeros_(m.bias)


def bce(p, target):
    p = p.clamp(FLOOR, 1.0 - FLOOR)
    return -(target * p.log() + (1 - target) * (1 - p).log()).mean()


def run(seed, data, steps, latent=100, batch=64):
    torch.manual_seed(seed)
    g = nn.Sequential(nn.Linear(latent, 256), nn.LeakyReLU(0.2), nn.Linear(256, 512),
                      nn.LeakyReLU(0.2), nn.Linear(512, 1024), nn.LeakyReLU(0.2),
                      nn.Linear(1024, 2), nn.Tanh()).double()
    d = nn.Sequential(nn.Linear(2, 512), nn.LeakyReLU(0.2), nn.Linear(512, 256),
                      nn.LeakyReLU(0.2), nn.Linear(256, 1), nn.Sigmoid()).double()
    g.apply(glorot)
    d.apply(glorot)
    og = torch.optim.Adam(g.parameters(), lr=2e-4, betas=(0.5, 0.999), eps=1e-8)
    od = torch.optim.Adam(d.parameters(), lr=2e-4, betas=(0.5, 0.999), eps=1e-8)
    step = 0
    while step < steps:
        for idx in torch.randperm(len(data)).split(batch):
            if step == steps:
                break
            real = data[idx]
            n = len(real)
            with torch.no_grad():
                fake = g(torch.randn(n, latent, dtype=torch.float64))
            od.zero_grad()
            ld = 0.5 * (bce(d(real), torch.ones(n, 1, dtype=torch.float64)) +
                        bce(d(fake), torch.zeros(n, 1, dtype=torch.float64)))
            ld.backward()
            od.step()
            og.zero_grad()
            lg = bce(d(g(torch.randn(n, latent, dtype=torch.float64))),
                     torch.ones(n, 1, dtype=torch.float64))
            lg.backward()
            og.step()
            step += 1
    with torch.no_grad():
        return g(torch.randn(1000, latent, dtype=torch.float64)).mean(0).tolist()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--early-stop", action="store_true",
                    help="stop once the verdict is settled (3 passes or 3 failures)")
    args = ap.parse_args()
    torch.set_num_threads(1)
    gen = torch.Generator().manual_seed(20240601)
    data = (0.3 + 0.05 * torch.randn(5000, 2, generator=gen, dtype=torch.float64)).clamp(-1, 1)
    passed = run_count = 0
    for seed in range(args.seeds):
        if args.early_stop and (passed >= 3 or run_count - passed >= 3):
            break
        mx, my = run(seed, data, args.steps)
        ok = abs(mx - 0.3) <= 0.3 and abs(my - 0.3) <= 0.3
        passed += ok
        run_count += 1
        print(f"seed {seed}: mean=({mx:.3f},{my:.3f}) {'ok' if ok else 'x'}", flush=True)
    verdict = "PASS" if passed >= 3 else "FAIL"
    print(f"{verdict} {passed}/{run_count}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
