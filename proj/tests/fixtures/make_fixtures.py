#!/usr/bin/env python3
"""Writes the miniature on-disk datasets used by the loader tests.

    python3 tests/fixtures/make_fixtures.py tests/fixtures

Everything is handcrafted: rectangles for masks, constant depth inside them,
hand-picked poses. Output is deterministic.
"""
import itertools
import math
import os
import sys

import cv2
import numpy as np


def box_corners(ex, ey, ez):
    return [(sx * ex / 2, sy * ey / 2, sz * ez / 2) for sx, sy, sz in itertools.product((-1, 1), repeat=3)]


def write_model(models_dir, class_id, pts, symmetric):
    os.makedirs(models_dir, exist_ok=True)
    path = os.path.join(models_dir, "obj_%02d.xyz" % class_id)
    with open(path, "w") as f:
        f.write("%d\n" % len(pts))
        for p in pts:
            f.write("%.9g %.9g %.9g\n" % p)
    diam = max(math.dist(a, b) for a in pts for b in pts)
    with open(path + ".meta", "w") as f:
        f.write("class_id %d\ndiameter %.12g\nsymmetric %d\n" % (class_id, diam, int(symmetric)))


def rot_z(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]


def rot_x(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return [1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]


def fmt_list(v):
    return "[" + ", ".join("%.8f" % x for x in v) + "]"


MODELS = {
    1: (box_corners(0.06, 0.04, 0.02), False),
    2: (box_corners(0.03, 0.03, 0.08), True),
    3: (box_corners(0.05, 0.05, 0.05), False),
}


def linemod(root):
    rows, cols = 24, 32
    for cid in (1, 2):
        write_model(os.path.join(root, "models"), cid, *MODELS[cid])
    poses = {
        1: [(rot_z(0), [10.0, -5.0, 600.0]), (rot_z(30), [0.0, 0.0, 650.0]), (rot_x(45), [-12.5, 8.0, 700.0])],
        2: [(rot_x(90), [5.0, 5.0, 550.0]), (rot_z(-60), [20.0, -10.0, 620.0]), (rot_z(180), [0.0, 3.0, 680.0])],
    }
    for cid in (1, 2):
        d = os.path.join(root, "data", "%02d" % cid)
        for sub in ("rgb", "depth", "mask"):
            os.makedirs(os.path.join(d, sub), exist_ok=True)
        gt_lines, info_lines = [], []
        for frame, (r, t) in enumerate(poses[cid]):
            r0, c0 = 6 + frame, 8 + 2 * frame
            rgb = np.full((rows, cols, 3), 20, np.uint8)
            depth = np.zeros((rows, cols), np.uint16)
            mask = np.zeros((rows, cols), np.uint8)
            rgb[r0:r0 + 8, c0:c0 + 10] = (200, 40 * cid, 30)
            depth[r0:r0 + 8, c0:c0 + 10] = int(round(t[2]))
            # Object 01 uses 0/255 masks, object 02 label-valued masks.
            mask[r0:r0 + 8, c0:c0 + 10] = 255 if cid == 1 else cid
            name = "%04d.png" % frame
            cv2.imwrite(os.path.join(d, "rgb", name), rgb[:, :, ::-1])
            cv2.imwrite(os.path.join(d, "depth", name), depth)
            cv2.imwrite(os.path.join(d, "mask", name), mask)
            gt_lines.append("%d:\n  - cam_R_m2c: %s\n    cam_t_m2c: %s\n    obj_id: %d\n"
                            % (frame, fmt_list(r), fmt_list(t), cid))
            info_lines.append("%d:\n  cam_K: %s\n  depth_scale: 1.0\n"
                              % (frame, fmt_list([572.4114, 0.0, 325.2611, 0.0, 573.57043, 242.04899, 0.0, 0.0, 1.0])))
        with open(os.path.join(d, "gt.yml"), "w") as f:
            f.write("".join(gt_lines))
        with open(os.path.join(d, "info.yml"), "w") as f:
            f.write("".join(info_lines))
        with open(os.path.join(d, "test.txt"), "w") as f:
            f.write("0000\n0001\n0002\n")
        with open(os.path.join(d, "train.txt"), "w") as f:
            f.write("0001\n")


def ycbv(root):
    rows, cols = 30, 40
    for cid in (1, 2, 3):
        write_model(os.path.join(root, "models"), cid, *MODELS[cid])
    cams = {
        "0000": ([1066.778, 0.0, 312.9869, 0.0, 1067.487, 241.3109, 0.0, 0.0, 1.0], 10000.0),
        "0001": ([1077.836, 0.0, 323.7872, 0.0, 1078.189, 279.6921, 0.0, 0.0, 1.0], 5000.0),
    }
    for vi, (video, (k, factor)) in enumerate(sorted(cams.items())):
        d = os.path.join(root, "data", video)
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "camera.yml"), "w") as f:
            f.write("intrinsic_matrix: %s\nfactor_depth: %.1f\n" % (fmt_list(k), factor))
        for fi, frame in enumerate(("000001", "000002")):
            rgb = np.full((rows, cols, 3), 15, np.uint8)
            depth = np.zeros((rows, cols), np.uint16)
            label = np.zeros((rows, cols), np.uint8)
            poses = []
            for cid in (1, 2, 3):
                r0, c0 = 4 + 2 * fi, 2 + 12 * (cid - 1) + vi
                z = 0.5 + 0.1 * cid + 0.05 * fi
                rgb[r0:r0 + 10, c0:c0 + 9] = (60 * cid, 100, 255 - 60 * cid)
                depth[r0:r0 + 10, c0:c0 + 9] = int(round(z * factor))
                label[r0:r0 + 10, c0:c0 + 9] = cid
                r = rot_z(30.0 * cid + 90.0 * fi) if cid != 2 else rot_x(15.0 + 10.0 * vi)
                t = [0.02 * (cid - 2), -0.01 * fi, z]
                poses.append(r[0:3] + [t[0]] + r[3:6] + [t[1]] + r[6:9] + [t[2]])
            cv2.imwrite(os.path.join(d, frame + "-color.png"), rgb[:, :, ::-1])
            cv2.imwrite(os.path.join(d, frame + "-depth.png"), depth)
            cv2.imwrite(os.path.join(d, frame + "-label.png"), label)
            with open(os.path.join(d, frame + "-meta.yml"), "w") as f:
                f.write("cls_indexes: [1, 2, 3]\nposes:\n")
                for p in poses:
                    f.write("  - %s\n" % fmt_list(p))
    os.makedirs(os.path.join(root, "image_sets"), exist_ok=True)
    with open(os.path.join(root, "image_sets", "test.txt"), "w") as f:
        f.write("0001/000002\n0000/000001\n0001/000001\n0000/000002\n")


def broken(root):
    """A LineMOD-style tree whose second frame carries a non-rotation."""
    linemod(root)
    path = os.path.join(root, "data", "02", "gt.yml")
    with open(path) as f:
        text = f.read()
    bad = fmt_list([1.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    lines = text.split("\n")
    lines[5] = "  - cam_R_m2c: " + bad
    with open(path, "w") as f:
        f.write("\n".join(lines))


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    linemod(os.path.join(out, "linemod_mini"))
    ycbv(os.path.join(out, "ycbv_mini"))
    broken(os.path.join(out, "linemod_bad_pose"))
