"""Command-line harness: extraction, approximation sweeps, matching, pose
estimation from synthetic problems, and trajectory evaluation.

Exit codes: 0 success, 1 runtime/data error, 2 usage error (argparse and
missing input files).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, matcher, oracle, pipeline, pose, rbrief, synth
from ._stream import BACKEND
from .imgcore import load_pgm, write_pgm


def _config_echo(cfg: pipeline.PipelineConfig) -> str:
    return (
        f"threshold={cfg.threshold} sectors={cfg.sectors} "
        f"pixel_bits={cfg.pixel_bits} brief_units={cfg.brief_units} "
        f"nmax={cfg.nmax} backend={BACKEND}"
    )


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p


def _config_from_args(args) -> pipeline.PipelineConfig:
    pattern = rbrief.load_pattern(_require_file(args.pattern)) if args.pattern else rbrief.default_pattern()
    return pipeline.PipelineConfig(
        threshold=args.threshold,
        sectors=args.sectors,
        pixel_bits=args.pixel_bits,
        brief_units=args.brief_units,
        nmax=args.nmax,
        pattern=pattern,
        backend=args.backend,
    )


def _add_pipeline_flags(sub, pixel_bits_default=6):
    sub.add_argument("--threshold", type=int, default=20, help="FAST threshold")
    sub.add_argument("--sectors", type=int, default=64, choices=(16, 32, 64, 128),
                     help="orientation sector count")
    sub.add_argument("--pixel-bits", dest="pixel_bits", type=int,
                     default=pixel_bits_default, help="pixel bit depth after FAST")
    sub.add_argument("--brief-units", dest="brief_units", type=int, default=4,
                     help="BRIEF unit count; 0 means unlimited")
    sub.add_argument("--nmax", type=int, default=1000, help="keypoints kept per frame")
    sub.add_argument("--pattern", default=None, help="BRIEF pattern file")
    sub.add_argument("--backend", default="auto",
                     choices=("auto", "compiled", "python"), help="streaming backend")


def cmd_extract(args) -> int:
    cfg = _config_from_args(args)
    inputs = [_require_file(p) for p in args.inputs]
    if args.out and len(inputs) > 1:
        raise ValueError("--out is only valid with a single input; use --out-dir")
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for src in inputs:
        img = load_pgm(src)
        result = pipeline.run_frame(img, cfg)
        base = out_dir / src.stem if out_dir else src.with_suffix("")
        feat_path = Path(args.out) if args.out else Path(f"{base}.orbx")
        pipeline.write_features(feat_path, result.keypoints)
        pipeline.write_stats_csv(Path(f"{base}.stats.csv"), result, _config_echo(cfg))
        tot = result.totals()
        print(
            f"{src.name}: keypoints={tot['keypoints']} descriptors={tot['descriptors']} "
            f"dropped={tot['dropped']} -> {feat_path}"
        )
        if args.float_reference:
            ref = oracle.ref_pipeline(img, cfg)
            comparison = oracle.compare_runs(result.keypoints_all, ref)
            oracle.write_degradation_csv(
                Path(f"{base}.degradation.csv"), [(src.name, comparison)], _config_echo(cfg)
            )
            print(
                f"  vs float reference: common={comparison.common} "
                f"agreement={comparison.agreement:.4f} symdiff={comparison.symdiff_rate:.4f}"
            )
    return 0


def _sweep_settings(mode: str) -> list[int]:
    return [16, 32, 64, 128] if mode == "sectors" else [4, 5, 6, 7, 8]


def _positions(kps) -> dict:
    return {(k.level, k.x, k.y): k for k in kps if k.descriptor is not None}


def run_sweep(frames, mode: str, base_cfg: pipeline.PipelineConfig):
    """Fixed-point runs for each setting against one float reference.

    Returns rows of (setting, common keypoints, mean hamming, descriptor
    agreement, match inlier rate). Drops are disabled so descriptor fidelity
    is measured on identical keypoint sets across settings.
    """
    refs = [oracle.ref_pipeline(img, base_cfg) for img in frames]
    ref_maps = [{(k.level, k.x, k.y): k for k in ref} for ref in refs]
    ref_matches = []
    for a, b in zip(refs, refs[1:]):
        pairs = matcher.match([k.descriptor for k in a], [k.descriptor for k in b])
        ref_matches.append(
            {((a[m.index_a].level, a[m.index_a].x, a[m.index_a].y),
              (b[m.index_b].level, b[m.index_b].x, b[m.index_b].y)) for m in pairs}
        )

    rows = []
    for setting in _sweep_settings(mode):
        if mode == "sectors":
            cfg = pipeline.PipelineConfig(
                threshold=base_cfg.threshold, sectors=setting,
                pixel_bits=base_cfg.pixel_bits, brief_units=0,
                nmax=base_cfg.nmax, pattern=base_cfg.pattern, backend=base_cfg.backend,
            )
        else:
            cfg = pipeline.PipelineConfig(
                threshold=base_cfg.threshold, sectors=base_cfg.sectors,
                pixel_bits=setting, brief_units=0,
                nmax=base_cfg.nmax, pattern=base_cfg.pattern, backend=base_cfg.backend,
            )
        runs = [pipeline.run_frame(img, cfg) for img in frames]
        total_common = 0
        total_hamming = 0
        for run, ref_map in zip(runs, ref_maps):
            for key, kp in _positions(run.keypoints).items():
                ref_kp = ref_map.get(key)
                if ref_kp is not None:
                    total_common += 1
                    total_hamming += matcher.hamming(kp.descriptor, ref_kp.descriptor)
        mean_h = total_hamming / total_common if total_common else 0.0

        inliers = 0
        total_matches = 0
        for ra, (a, b) in zip(ref_matches, zip(runs, runs[1:])):
            ka = [k for k in a.keypoints if k.descriptor is not None]
            kb = [k for k in b.keypoints if k.descriptor is not None]
            pairs = matcher.match([k.descriptor for k in ka], [k.descriptor for k in kb])
            for m in pairs:
                total_matches += 1
                key = ((ka[m.index_a].level, ka[m.index_a].x, ka[m.index_a].y),
                       (kb[m.index_b].level, kb[m.index_b].x, kb[m.index_b].y))
                if key in ra:
                    inliers += 1
        inlier_rate = inliers / total_matches if total_matches else 0.0
        rows.append(
            {
                "setting": setting,
                "common": total_common,
                "mean_hamming": mean_h,
                "agreement": 1.0 - mean_h / 256.0,
                "match_inlier_rate": inlier_rate,
            }
        )
    return rows


def cmd_sweep(args) -> int:
    frame_dir = Path(args.frames)
    if not frame_dir.is_dir():
        raise FileNotFoundError(f"no such directory: {args.frames}")
    paths = sorted(frame_dir.glob("*.pgm"))
    if args.limit:
        paths = paths[: args.limit]
    if not paths:
        raise ValueError(f"no .pgm frames in {args.frames}")
    frames = [load_pgm(p) for p in paths]
    cfg = _config_from_args(args)
    rows = run_sweep(frames, args.mode, cfg)
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write(f"# config: mode={args.mode} frames={len(frames)} {_config_echo(cfg)}\n")
        fh.write("setting,frames,common_keypoints,mean_hamming,agreement,match_inlier_rate\n")
        for r in rows:
            fh.write(
                f"{r['setting']},{len(frames)},{r['common']},"
                f"{r['mean_hamming']:.3f},{r['agreement']:.6f},{r['match_inlier_rate']:.6f}\n"
            )
    for r in rows:
        print(
            f"{args.mode}={r['setting']}: agreement={r['agreement']:.4f} "
            f"inlier_rate={r['match_inlier_rate']:.4f}"
        )
    return 0


def cmd_match(args) -> int:
    kps_a = pipeline.read_features(_require_file(args.a))
    kps_b = pipeline.read_features(_require_file(args.b))
    pairs = matcher.match(
        [k.descriptor for k in kps_a],
        [k.descriptor for k in kps_b],
        max_dist=args.max_dist,
        mutual=not args.no_mutual,
    )
    echo = f"a={args.a} b={args.b} max_dist={args.max_dist} mutual={not args.no_mutual}"
    matcher.write_matches_csv(args.out, pairs, echo)
    print(f"{len(pairs)} matches -> {args.out}")
    return 0


def cmd_pose(args) -> int:
    problem = synth.load_pose_problem(_require_file(args.problem))
    ki = problem["intrinsics"]
    K = pose.Intrinsics(ki["fx"], ki["fy"], ki["cx"], ki["cy"])
    points = np.asarray(problem["points"], dtype=np.float64)
    current = pose.PoseSE3.identity()
    ts, positions, quats = [], [], []
    for frame in problem["frames"]:
        obs = [(points[int(pid)], (u, v)) for pid, u, v in frame["observations"]]
        result = pose.motion_ba(obs, K, current, iters=args.iters, huber_delta=args.huber)
        current = result.pose
        inv = current.inverse()  # write world-from-camera, TUM convention
        ts.append(frame["timestamp"])
        positions.append(inv.t)
        quats.append(pose.rotation_to_quaternion(inv.R))
    traj = pose.Trajectory(ts, positions, quats)
    pose.save_tum_trajectory(args.out, traj)
    print(f"{len(ts)} poses -> {args.out}")
    return 0


def cmd_ate(args) -> int:
    est = pose.load_tum_trajectory(_require_file(args.est))
    gt = pose.load_tum_trajectory(_require_file(args.gt))
    stats = pose.ate_rmse(est, gt, max_dt=args.max_dt, align=not args.no_align)
    print(
        f"ate_rmse={stats.rmse:.6f} mean={stats.mean:.6f} "
        f"median={stats.median:.6f} stddev={stats.stddev:.6f} pairs={stats.pairs}"
    )
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(f"# config: est={args.est} gt={args.gt} max_dt={args.max_dt} align={not args.no_align}\n")
            fh.write("rmse,mean,median,stddev,pairs\n")
            fh.write(f"{stats.rmse:.9f},{stats.mean:.9f},{stats.median:.9f},{stats.stddev:.9f},{stats.pairs}\n")
    return 0


def cmd_synth_frames(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = synth.render_plane_sequence(
        args.count, width=args.width, height=args.height, seed=args.seed
    )
    for i, img in enumerate(frames):
        write_pgm(out_dir / f"frame_{i:04d}.pgm", img)
    print(f"{len(frames)} frames -> {out_dir}")
    return 0


def cmd_synth_pose_problem(args) -> int:
    problem = synth.make_pose_problem(
        n_frames=args.frames, n_points=args.points, seed=args.seed
    )
    synth.save_pose_problem(args.out, problem)
    gt_rows = problem["groundtruth"]
    traj = pose.Trajectory(
        [r[0] for r in gt_rows],
        [r[1:4] for r in gt_rows],
        [r[4:8] for r in gt_rows],
    )
    pose.save_tum_trajectory(args.gt_out, traj)
    print(f"problem -> {args.out}, ground truth -> {args.gt_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbx", description=__doc__)
    parser.add_argument("--version", action="version", version=f"orbx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract features from PGM images")
    p.add_argument("inputs", nargs="+", help="input PGM image(s)")
    p.add_argument("--out", default=None, help="feature dump path (single input)")
    p.add_argument("--out-dir", default=None, help="directory for outputs")
    p.add_argument("--float-reference", action="store_true",
                   help="also run the float reference and write a degradation CSV")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sweep", help="sector or bit-depth approximation sweep")
    p.add_argument("--frames", required=True, help="directory of PGM frames")
    p.add_argument("--mode", required=True, choices=("sectors", "bits"))
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--limit", type=int, default=0, help="use only the first N frames")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("match", help="match two feature dumps")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--max-dist", dest="max_dist", type=int,
                   default=matcher.DEFAULT_MAX_DISTANCE)
    p.add_argument("--no-mutual", action="store_true",
                   help="disable the mutual nearest-neighbor check")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("pose", help="chain motion-only BA over a pose problem")
    p.add_argument("--problem", required=True, help="pose problem JSON")
    p.add_argument("--out", required=True, help="estimated trajectory (TUM format)")
    p.add_argument("--iters", type=int, default=pose.DEFAULT_ITERS)
    p.add_argument("--huber", type=float, default=None)
    p.set_defaults(func=cmd_pose)

    p = sub.add_parser("ate", help="absolute trajectory error of two TUM files")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--max-dt", dest="max_dt", type=float, default=pose.DEFAULT_MAX_DT)
    p.add_argument("--no-align", action="store_true", help="skip rigid alignment")
    p.add_argument("--out", default=None, help="optional metrics CSV")
    p.set_defaults(func=cmd_ate)

    p = sub.add_parser("synth", help="generate synthetic inputs")
    synth_sub = p.add_subparsers(dest="synth_command", required=True)

    q = synth_sub.add_parser("frames", help="render a textured-plane PGM sequence")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--count", type=int, default=20)
    q.add_argument("--width", type=int, default=320)
    q.add_argument("--height", type=int, default=240)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_synth_frames)

    q = synth_sub.add_parser("pose-problem", help="generate a noiseless pose problem")
    q.add_argument("--out", required=True, help="problem JSON path")
    q.add_argument("--gt-out", dest="gt_out", required=True,
                   help="ground-truth trajectory path")
    q.add_argument("--frames", type=int, default=12)
    q.add_argument("--points", type=int, default=80)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_synth_pose_problem)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
