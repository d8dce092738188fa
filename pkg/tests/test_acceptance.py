"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are printed in the
terminal summary) or ``python tests/test_acceptance.py``.
"""

import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zcollide.detector import (  # noqa: E402
    CollisionConfig,
    DetectionVolume,
    build_environment_field,
    build_object_field,
    detect,
    texel_world_point,
)
from zcollide.geometry import Mesh, RigidTransform, apply_transform, dump_obj, face_normals  # noqa: E402
from zcollide.oracle import (  # noqa: E402
    Facing,
    Select,
    mesh_collide,
    point_inside_closed_mesh,
    raycast_many,
    scene_collide,
)
from zcollide.particles import CubeField, FieldSpec, ParticleSet, ParticleSystem  # noqa: E402
from zcollide.runner import format_report, run_sequence  # noqa: E402
from zcollide.scene import parse_scene  # noqa: E402
from zcollide.shapes import box, centered_box, convex_hull, icosphere, quad  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, str] = {}
Z = np.array([0.0, 0.0, 1.0])
Y = np.array([0.0, 1.0, 0.0])


def record(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(RESULTS[number])


def plane_facing(center, normal_axis, sign, half, object_id):
    """Axis-aligned square through ``center`` whose normal is ``sign * e_axis``."""
    a, b = [k for k in range(3) if k != normal_axis]
    u, v = np.zeros(3), np.zeros(3)
    u[a], v[b] = 2 * half, 2 * half
    corner = np.asarray(center, float) - 0.5 * u - 0.5 * v
    n = np.cross(u, v)
    if np.sign(n[normal_axis]) != sign:
        u, v = v, u
    return quad(corner, u, v, object_id)


def interior_texels(coverage):
    """Covered texels whose whole 3x3 neighbourhood is covered."""
    padded = np.pad(coverage, 1, constant_values=False)
    h, w = coverage.shape
    out = coverage.copy()
    for dj in (0, 1, 2):
        for di in (0, 1, 2):
            out &= padded[dj:dj + h, di:di + w]
    return out


# ---------------------------------------------------------------------------
# 1. analytic first contact
# ---------------------------------------------------------------------------

def test_1_analytic_first_contact():
    t0 = time.perf_counter()
    res = 128
    vol = DetectionVolume.from_center((0, 0, 0), Z, Y, 1.0, 1.0, 2.0, res, res)
    cube = box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    s_o = build_object_field(cube, vol)
    step = Fraction(1, res)  # one texel-equivalent in normalized depth
    d_o = Fraction(3, 4)
    expected = next(k for k in range(100) if 1 - k * step <= d_o)
    verdicts = []
    for k in range(100):
        d = 1.0 - k / res
        z = -1.0 + 2.0 * d
        wall = plane_facing((0, 0, z), 2, -1, 2.0, 2)
        verdicts.append(detect(cube, [wall], vol, reuse_object_field=s_o).collided)
    first = verdicts.index(True) if any(verdicts) else None
    elapsed = time.perf_counter() - t0
    ok = first == expected and all(verdicts[expected:]) and elapsed < 5.0
    record(1, ok, f"first contact frame {first} (analytic {expected}), {elapsed:.2f}s (< 5s)")
    assert ok


# ---------------------------------------------------------------------------
# 2. oracle agreement band
# ---------------------------------------------------------------------------

def _box_gap_bounds(center, boxes_local, radius, k_min):
    """Bounds on the sphere/box surface gap from the center's distance to each box."""
    lo, hi = np.inf, np.inf
    for rot, pos, half in boxes_local:
        local = rot.T @ (center - pos)
        dc = float(np.linalg.norm(np.maximum(np.abs(local) - half, 0.0)))
        lo, hi = min(lo, dc - radius), min(hi, dc - radius * k_min)
    return lo, hi


def test_2_oracle_agreement_band():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    radius, res = 1.0, 256
    sphere = icosphere(3, radius)
    n, _ = face_normals(sphere.triangle_vertices)
    k_min = float(np.min(np.einsum("ij,ij->i", n, sphere.triangle_vertices[:, 0]))) / radius
    half = 1.02 * radius
    base = DetectionVolume.from_center((0, 0, 0), Z, Y, half, half, 2 * half, res, res)
    diag = base.texel_diagonal
    s_o = build_object_field(sphere, base)
    shrink = 1.0 - diag / (radius * k_min)
    shrunk = sphere.with_vertices(sphere.vertices * shrink)

    # ten boxes elongated along the view axis (longer than the sphere is wide,
    # narrower than it), rotated about the view axis
    boxes, env = [], []
    for k in range(10):
        halfs = np.array([rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5), rng.uniform(1.1, 1.5)])
        pos = np.array([rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0.0, 3.0)])
        t = RigidTransform.from_axis_angle(Z, rng.uniform(0, np.pi), pos)
        boxes.append((t.rotation, pos, halfs))
        env.append(apply_transform(centered_box((0, 0, 0), halfs, object_id=k + 2), t))
    near_faces = [b.vertices[:, 2].min() for b in env]

    def footprint_overlap(center, b):
        lo, hi = b.vertices[:, :2].min(axis=0), b.vertices[:, :2].max(axis=0)
        return np.all(lo <= center[:2] + half) and np.all(hi >= center[:2] - half)

    frames = []
    while len(frames) < 200:
        xy = rng.uniform(-4.5, 4.5, 2)
        hit = [k for k in range(10) if footprint_overlap(np.r_[xy, 0.0], env[k])]
        z_cap = min((near_faces[k] for k in hit), default=4.0)
        c = np.r_[xy, rng.uniform(z_cap - 2.5 * radius, z_cap)]
        lo, hi = _box_gap_bounds(c, boxes, radius, k_min)
        # stay clear of the one-texel band around first contact
        if lo - 2 * diag < 0 < hi + 2 * diag:
            continue
        frames.append(c)

    neg = pos = band = 0
    failures = []
    for c in frames:
        t = RigidTransform.from_translation(c)
        obj = apply_transform(sphere, t)
        vol = base.translated(c)
        report = detect(obj, env, vol, reuse_object_field=s_o.rebased(vol))
        verdict = scene_collide(obj, env, separation_cap=4 * diag)
        sep = verdict.min_separation_estimate
        if not verdict.collided and (sep is None or sep > diag):
            neg += 1
            if report.collided:
                failures.append(("false positive", c))
        elif verdict.collided and scene_collide(apply_transform(shrunk, t), env).collided:
            pos += 1
            if not report.collided:
                failures.append(("miss", c))
        else:
            band += 1
    elapsed = time.perf_counter() - t0
    ok = not failures and band <= 0.1 * len(frames) and elapsed < 60.0
    record(2, ok, f"{len(frames)} frames: {neg} clear, {pos} penetrating, {band} in band, "
                  f"{len(failures)} disagreements outside band, {elapsed:.1f}s (< 60s)")
    assert ok, failures[:5]


# ---------------------------------------------------------------------------
# 3. capability semantics on closed meshes
# ---------------------------------------------------------------------------

def test_3_inclusion_semantics():
    sphere = icosphere(3, 1.0)
    vol = DetectionVolume.from_center((0, 0, 0), Z, Y, 1.1, 1.1, 2.2, 128, 128)

    # (a) a box cutting through the sphere's surface
    crossing = centered_box((0.8, 0.0, 0.4), (0.4, 0.3, 0.3), object_id=2)
    a_oracle = mesh_collide(sphere, crossing).collided
    a = detect(sphere, [crossing], vol).collided

    # (b) a small box entirely inside the sphere
    inner = centered_box((0.1, -0.1, 0.0), (0.2, 0.2, 0.2), object_id=3)
    inside = all(point_inside_closed_mesh(p, sphere) for p in inner.vertices)
    b = detect(sphere, [inner], vol).collided

    # (c) the sphere inside a large outward-wound shell; the volume starts
    # inside the shell and reaches past its far wall
    shell = box((-3, -3, -3), (3, 3, 3), object_id=4)
    enclosed = point_inside_closed_mesh((0, 0, 0), shell) and all(
        point_inside_closed_mesh(p, shell) for p in sphere.vertices[::40])
    wide = DetectionVolume.from_center((0, 0, 1.0), Z, Y, 1.5, 1.5, 5.0, 128, 128)
    c = detect(sphere, [shell], wide).collided
    c_oracle = mesh_collide(sphere, shell).collided

    ok = a_oracle and a and inside and b and enclosed and not c and not c_oracle
    record(3, ok, f"(a) intersection -> {a}, (b) environment inside object -> {b}, "
                  f"(c) object inside environment -> {c} (expected True, True, False)")
    assert ok


# ---------------------------------------------------------------------------
# 4. false positive behind the object
# ---------------------------------------------------------------------------

def test_4_false_positive_behind_object():
    sphere = icosphere(3, 1.0)
    # the volume reaches back to z=-2; the sphere's back surface is at z=-1
    vol = DetectionVolume.from_center((0, 0, -0.5), Z, Y, 1.1, 1.1, 3.0, 128, 128)
    obstacle = box((-0.2, -0.2, -1.8), (0.2, 0.2, -1.3), object_id=2)
    oracle = mesh_collide(sphere, obstacle).collided
    single = detect(sphere, [obstacle], vol).collided
    two = detect(sphere, [obstacle], vol, CollisionConfig(two_boundary=True)).collided
    ok = not oracle and single and not two
    record(4, ok, f"oracle {oracle}, single-boundary {single} (expected True), two-boundary {two} "
                  "(expected False)")
    assert ok


# ---------------------------------------------------------------------------
# 5. height field vs ray casting
# ---------------------------------------------------------------------------

def test_5_field_matches_raycast():
    rng = np.random.default_rng(55)
    worst = 0.0
    texels = 0
    for _ in range(20):
        mesh = convex_hull(rng.normal(size=(40, 3)) * rng.uniform(0.3, 0.8, 3))
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        center = 0.5 * (lo + hi)
        hw, hh = 0.55 * (hi - lo)[:2]
        length = 1.2 * (hi - lo)[2]
        vol = DetectionVolume.from_center(center, Z, Y, hw, hh, length, 64, 64)
        L = vol.camera.depth_length
        for build, facing, select in ((build_object_field, Facing.BACK, Select.FARTHEST),
                                      (lambda m, v: build_environment_field([m], v), Facing.FRONT,
                                       Select.NEAREST)):
            f = build(mesh, vol)
            rows, cols = np.nonzero(interior_texels(f.coverage))
            origins = np.array([texel_world_point(vol, (i, j), 0.0) for j, i in zip(rows, cols)])
            t, hit, _, _, _ = raycast_many(mesh, origins, Z, facing, select, (0.0, L))
            assert hit.all()
            err = np.abs(f.depth[rows, cols] * L - t)
            worst = max(worst, float(err.max() / L))
            texels += len(rows)
    ok = worst <= 1e-6
    record(5, ok, f"{texels} interior texels over 20 meshes x 2 field kinds, "
                  f"max |error| = {worst:.2e} L (<= 1e-6 L)")
    assert ok


# ---------------------------------------------------------------------------
# 6. stencil neutrality and determinism
# ---------------------------------------------------------------------------

def _random_scene(rng):
    obj = convex_hull(rng.normal(size=(20, 3)) * 0.4)
    env = [apply_transform(centered_box((0, 0, 0), rng.uniform(0.1, 0.6, 3), object_id=k + 2),
                           RigidTransform.from_axis_angle(rng.normal(size=3), rng.uniform(0, 3),
                                                          rng.uniform(-1, 1, 3)))
           for k in range(int(rng.integers(1, 6)))]
    vol = DetectionVolume.from_center(rng.uniform(-0.1, 0.1, 3), Z, Y, 0.8, 0.8, 1.6, 64, 64)
    return obj, env, vol


def test_6_stencil_neutral_and_deterministic(tmp_path):
    rng = np.random.default_rng(66)
    mismatches = collided = 0
    big = 10**6
    for _ in range(50):
        obj, env, vol = _random_scene(rng)
        off = detect(obj, env, vol, CollisionConfig(use_stencil=False, max_contacts_reported=big))
        on = detect(obj, env, vol, CollisionConfig(use_stencil=True, max_contacts_reported=big))
        mismatches += off != on
        collided += off.collided

    # determinism through files: the same scene run twice from disk
    differing = 0
    for k in range(50):
        obj, env, vol = _random_scene(rng)
        d = tmp_path / f"s{k}"
        d.mkdir()
        (d / "obj.obj").write_text(dump_obj(obj))
        lines = ["object.mesh = obj.obj",
                 "volume.center = " + " ".join(map(repr, vol.center.tolist())),
                 "volume.half_extents = 0.8 0.8", "volume.length = 1.6", "volume.resolution = 64x64",
                 "frames.count = 2", "detection.stencil = on"]
        for m in env:
            (d / f"e{m.object_id}.obj").write_text(dump_obj(m))
            lines.append(f"environment.{m.object_id}.mesh = e{m.object_id}.obj")
        lines.append(f"environment.{env[0].object_id}.key = 1 0.1 0 0")
        scene = parse_scene("\n".join(lines), d)
        outputs = []
        for run in ("a", "b"):
            res = run_sequence(scene, emit_maps=d / run)
            maps = {p.name: p.read_bytes() for p in sorted((d / run).iterdir())}
            outputs.append((format_report(res, scene).encode(), maps))
        differing += outputs[0] != outputs[1]
    ok = mismatches == 0 and differing == 0
    record(6, ok, f"50 scenes ({collided} colliding): {mismatches} stencil mismatches; "
                  f"50 file re-runs: {differing} differing reports/maps")
    assert ok


# ---------------------------------------------------------------------------
# 7. particles
# ---------------------------------------------------------------------------

def test_7_particles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    n, steps, dt = 10_000, 500, 0.01
    g = np.array([0.0, 0.0, -9.81])
    plane = quad((-100, -100, 0), (200, 0, 0), (0, 200, 0), object_id=1)  # z=0 facing up
    pos = np.column_stack([rng.uniform(-5, 5, (n, 2)), rng.uniform(0.05, 3.0, n)])
    vel = np.column_stack([rng.uniform(-1, 1, (n, 2)), rng.uniform(-6, 6, n)])
    spec = FieldSpec("single", 50.0, 50.0, 20.0, (256, 256), source=(0, 0, 10), direction=-Z)
    system = ParticleSystem([plane], spec, ParticleSet(pos, vel), g, restitution=1.0)

    worst_speed = 0.0
    worst_depth = 0.0
    bounces = 0
    for _ in range(steps):
        before = system.particles.position.copy()
        r = system.advance(dt)
        travel = np.linalg.norm(r.particles.position - before, axis=1)
        step_bound = np.linalg.norm(r.incident_velocity - g * dt, axis=1) * dt + 0.5 * np.linalg.norm(g) * dt * dt
        below = np.maximum(-r.particles.position[:, 2], 0.0)
        worst_depth = max(worst_depth, float(np.max(below - np.maximum(step_bound, travel))))
        if r.bounce_count:
            vin = np.linalg.norm(r.incident_velocity[r.bounced], axis=1)
            vout = np.linalg.norm(r.particles.velocity[r.bounced], axis=1)
            worst_speed = max(worst_speed, float(np.max(np.abs(vout - vin) / vin)))
            bounces += r.bounce_count
    builds_single = system.field_builds / steps
    elapsed = time.perf_counter() - t0

    # builds per step do not depend on the particle count
    per_step = {}
    for kind, count in (("single", 10), ("single", 10_000), ("cube", 10), ("cube", 10_000)):
        p = ParticleSet(rng.uniform(-1, 1, (count, 3)) + [0, 0, 2], rng.normal(size=(count, 3)))
        fs = FieldSpec(kind, 50.0, 50.0, 20.0, (256, 256), source=(0, 0, 10), direction=-Z)
        s = ParticleSystem([plane], fs, p, g)
        for _ in range(5):
            s.advance(dt)
        per_step[(kind, count)] = s.field_builds / 5
    ok = (worst_depth <= 0.0 and worst_speed <= 1e-9 and builds_single == 1
          and per_step[("single", 10)] == per_step[("single", 10_000)] == 1
          and per_step[("cube", 10)] == per_step[("cube", 10_000)] == 6 and elapsed < 30.0)
    record(7, ok, f"{n} particles x {steps} steps, {bounces} bounces, max speed change {worst_speed:.1e} "
                  f"(<= 1e-9), penetration beyond one step {max(worst_depth, 0.0):.1e}, builds/step "
                  f"single {per_step[('single', 10)]:g}/{per_step[('single', 10_000)]:g}, cube "
                  f"{per_step[('cube', 10)]:g}/{per_step[('cube', 10_000)]:g}, {elapsed:.1f}s (< 30s)")
    assert ok


# ---------------------------------------------------------------------------
# 8. grid-aligned translation invariance
# ---------------------------------------------------------------------------

def _dyadic(a, q=256):
    return np.round(np.asarray(a) * q) / q


AXES = [(Z, Y), (-Z, Y), (np.array([1.0, 0, 0]), Z), (np.array([0, -1.0, 0]), np.array([1.0, 0, 0]))]


def _strip_world(report, shift):
    contacts = []
    for c in report.contacts:
        contacts.append((c.texel, c.depth_object, c.depth_environment, c.environment_normal,
                         c.environment_id, tuple(np.asarray(c.world_point) - shift)))
    return report.collided, report.contact_count, report.environment_ids, contacts


def test_8_translation_invariance():
    rng = np.random.default_rng(88)
    failures = 0
    for k in range(20):
        view, up = AXES[k % len(AXES)]
        res = int(rng.choice([32, 64, 128]))
        vol = DetectionVolume.from_center(_dyadic(rng.uniform(-1, 1, 3)), view, up, 1.0, 0.75, 2.0, res, res)
        obj = convex_hull(_dyadic(rng.normal(size=(16, 3)) * 0.4) + vol.center)
        env = [Mesh(_dyadic(centered_box(vol.center + rng.uniform(-0.8, 0.8, 3), rng.uniform(0.1, 0.5, 3)).vertices),
                    box((0, 0, 0), (1, 1, 1)).triangles, object_id=j + 2) for j in range(4)]
        px, py = vol.pitch
        cam = vol.camera
        a, b = rng.integers(-50, 50, 2)
        shift = a * px * cam.right + b * py * cam.up + (int(rng.integers(-8, 8)) / 64) * cam.depth_length * cam.view
        cfg = CollisionConfig(max_contacts_reported=10**6)
        ref = detect(obj, env, vol, cfg)
        t = RigidTransform.from_translation(shift)
        moved = detect(apply_transform(obj, t), [apply_transform(m, t) for m in env], vol.translated(shift), cfg)
        r0, r1 = _strip_world(ref, np.zeros(3)), _strip_world(moved, shift)
        same = r0[:3] == r1[:3] and len(r0[3]) == len(r1[3]) and all(
            c0[:5] == c1[:5] and np.array_equal(c0[5], c1[5]) for c0, c1 in zip(r0[3], r1[3]))
        failures += not same
    ok = failures == 0
    record(8, ok, f"20 scenes shifted by whole texels: {failures} reports differ")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
