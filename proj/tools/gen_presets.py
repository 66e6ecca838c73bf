#!/usr/bin/env python3
# Copyright 2026 The DrRL Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes presets/<dataset>-<backbone>-<loss>.cfg from the tuned values below.

Usage: tools/gen_presets.py [output_dir]   (default: presets/ next to tools/)
"""

import pathlib
import sys

# (lr, weight_decay, loss extras). CCL extras are (alpha, beta); SL is (tau,);
# DrRL in-distribution is (lr_beta, gamma, beta0) with c = 1.
IID = {
    "gowalla": {
        "mf": {
            "mse": (1e-3, 1e-7, ()), "bce": (1e-3, 1e-3, ()), "bpr": (1e-4, 1e-3, ()),
            "ccl": (1e-2, 0, (130, 0.80)), "sl": (1e-2, 0, (0.09,)),
            "drrl": (1e-5, 0, (1e-5, 1.09, 0.85)),
        },
        "lightgcn": {
            "mse": (1e-3, 1e-3, ()), "bce": (1e-3, 1e-8, ()), "bpr": (1e-3, 1e-6, ()),
            "ccl": (1e-3, 0, (160, 0.90)), "sl": (1e-1, 0, (0.08,)),
            "drrl": (1e-1, 0, (1e-4, 1.08, 0.90)),
        },
        "xsimgcl": {
            "mse": (1e-3, 1e-2, ()), "bce": (1e-3, 0, ()), "bpr": (1e-3, 0, ()),
            "ccl": (1e-2, 0, (160, 0.85)), "sl": (1e-1, 0, (0.07,)),
            "drrl": (1e-1, 0, (1e-4, 1.09, 0.90)),
        },
    },
    "amazonkitchen": {
        "mf": {
            "mse": (1e-4, 1e-2, ()), "bce": (1e-3, 1e-2, ()), "bpr": (1e-3, 1e-4, ()),
            "ccl": (1e-1, 0, (9, 0.85)), "sl": (1e-2, 0, (0.20,)),
            "drrl": (1e-3, 0, (1e-4, 1.2, 0.85)),
        },
        "lightgcn": {
            "mse": (1e-3, 1e-4, ()), "bce": (1e-3, 1e-4, ()), "bpr": (1e-3, 1e-7, ()),
            "ccl": (1e-3, 0, (7, 0.85)), "sl": (1e-1, 0, (0.25,)),
            "drrl": (1e-4, 0, (1e-4, 1.21, 0.85)),
        },
        "xsimgcl": {
            "mse": (1e-4, 0, ()), "bce": (1e-3, 0, ()), "bpr": (1e-3, 0, ()),
            "ccl": (1e-2, 0, (8, 0.80)), "sl": (1e-2, 0, (0.18,)),
            "drrl": (1e-2, 0, (1e-4, 1.24, 0.85)),
        },
    },
    "amazonelectronics": {
        "mf": {
            "mse": (1e-3, 1e-2, ()), "bce": (1e-3, 1e-2, ()), "bpr": (1e-3, 1e-3, ()),
            "ccl": (1e-3, 0, (6, 0.90)), "sl": (1e-1, 0, (0.26,)),
            "drrl": (1e-1, 0, (1e-5, 1.27, 0.70)),
        },
        "lightgcn": {
            "mse": (1e-3, 1e-6, ()), "bce": (1e-3, 1e-7, ()), "bpr": (1e-3, 1e-4, ()),
            "ccl": (1e-4, 0, (6, 0.85)), "sl": (1e-2, 0, (0.25,)),
            "drrl": (1e-1, 0, (1e-4, 1.21, 0.80)),
        },
        "xsimgcl": {
            "mse": (1e-3, 1e-7, ()), "bce": (1e-3, 0, ()), "bpr": (1e-3, 0, ()),
            "ccl": (1e-2, 0, (6, 0.80)), "sl": (1e-2, 0, (0.23,)),
            "drrl": (1e-2, 0, (1e-4, 1.19, 0.85)),
        },
    },
    "amazonbeauty": {
        "mf": {
            "mse": (1e-2, 1e-2, ()), "bce": (1e-3, 1e-2, ()), "bpr": (1e-3, 1e-5, ()),
            "ccl": (1e-4, 0, (9, 0.85)), "sl": (1e-1, 0, (0.20,)),
            "drrl": (1e-4, 0, (1e-5, 1.15, 0.90)),
        },
        "lightgcn": {
            "mse": (1e-2, 1e-2, ()), "bce": (1e-3, 1e-3, ()), "bpr": (1e-3, 1e-7, ()),
            "ccl": (1e-2, 0, (8, 0.85)), "sl": (1e-2, 0, (0.21,)),
            "drrl": (1e-2, 0, (1e-4, 1.17, 0.9)),
        },
        "xsimgcl": {
            "mse": (1e-3, 1e-2, ()), "bce": (1e-2, 1e-6, ()), "bpr": (1e-3, 0, ()),
            "ccl": (1e-2, 0, (9, 0.85)), "sl": (1e-1, 0, (0.18,)),
            "drrl": (1e-2, 0, (1e-5, 1.16, 0.85)),
        },
    },
}

# Temporal (out-of-distribution) split, MF only. DrRL extras are
# (lr_beta, gamma, c, beta0).
OOD = {
    "amazonkitchen": {
        "bpr": (1e-3, 0, ()), "ccl": (1e-2, 0, (9, 0.90)), "sl": (1e-1, 0, (0.19,)),
        "drrl": (1e-2, 0, (1e-4, 2.50, 5, 0.85)),
    },
    "amazonelectronics": {
        "bpr": (1e-4, 0, ()), "ccl": (1e-2, 0, (8, 0.80)), "sl": (1e-2, 0, (0.22,)),
        "drrl": (1e-1, 0, (1e-5, 1.16, 1.25, 0.90)),
    },
}

GAMMA_GRID = ",".join(f"{1.05 + 0.01 * k:.2f}" for k in range(31))


def num(x):
    return f"{x:g}"


def loss_lines(loss, extras, ood):
    lines = [f"kind = {loss}"]
    if loss == "ccl":
        lines += [f"alpha = {num(extras[0])}", f"beta = {num(extras[1])}"]
    elif loss == "sl":
        lines += [f"tau = {num(extras[0])}"]
    elif loss == "drrl":
        if ood:
            lr_beta, gamma, c, beta0 = extras
        else:
            (lr_beta, gamma, beta0), c = extras, 1
        lines += [f"gamma = {gamma if isinstance(gamma, str) else num(gamma)}", f"c = {num(c)}",
                  f"beta0 = {num(beta0)}", f"lr_beta = {num(lr_beta)}"]
    return lines


def render(name, dataset, split, backbone, loss, lr, wd, extras, ood=False):
    body = [
        f"# {dataset}, {backbone}, {loss} ({split} split)",
        "[data]",
        f"split_dir = splits/{dataset}-{split}",
        "[model]",
        f"backbone = {backbone}",
        "[loss]",
        *loss_lines(loss, extras, ood),
        "[train]",
        "batch_size = 1024",
        "n_neg = 1024",
        f"lr = {num(lr)}",
        f"weight_decay = {num(wd)}",
        "patience = 25",
        "[eval]",
        "ks = 10,20",
        "[output]",
        f"dir = runs/{name}",
    ]
    return "\n".join(body) + "\n"


def main():
    out = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else (
        pathlib.Path(__file__).resolve().parent.parent / "presets")
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for dataset, backbones in IID.items():
        for backbone, losses in backbones.items():
            for loss, (lr, wd, extras) in losses.items():
                name = f"{dataset}-{backbone}-{loss}"
                (out / f"{name}.cfg").write_text(
                    render(name, dataset, "iid", backbone, loss, lr, wd, extras))
                written += 1
            # Gamma search around the tuned point, c fixed to 1.
            lr, wd, (lr_beta, _, beta0) = losses["drrl"]
            name = f"{dataset}-{backbone}-drrl_grid"
            (out / f"{name}.cfg").write_text(
                render(name, dataset, "iid", backbone, "drrl", lr, wd,
                       (lr_beta, GAMMA_GRID, beta0)))
            written += 1
    for dataset, losses in OOD.items():
        for loss, (lr, wd, extras) in losses.items():
            name = f"{dataset}-mf-{loss}_ood"
            (out / f"{name}.cfg").write_text(
                render(name, dataset, "ood", "mf", loss, lr, wd, extras, ood=True))
            written += 1
    print(f"wrote {written} presets to {out}")


if __name__ == "__main__":
    main()
