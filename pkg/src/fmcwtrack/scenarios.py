"""Named scenes covering the standard indoor experiments.

All paths stay inside the radar field of view. "1T_AB" doubles as the
standard cluttered scene: furniture scatterers plus an enabled multipath
ghost (a reflective plane to the right of the radar).
"""

from __future__ import annotations

import math

from fmcwtrack.scene import GhostSpec, HumanTarget, Limb, Scatterer, Scene, default_limbs


def _walker(points, speed, torso_rcs=1.0, start_time=0.0, gait_phase=0.0):
    limbs = [
        Limb(l.rcs_fraction, l.velocity_amplitude_mps, l.gait_frequency_hz,
             l.phase_rad + gait_phase, l.offset_x_m, l.offset_y_m)
        for l in default_limbs()
    ]
    return HumanTarget.from_path(points, speed, start_time_s=start_time,
                                 torso_rcs=torso_rcs, limbs=limbs)


def _office_clutter() -> tuple[Scatterer, ...]:
    return (
        Scatterer(3.5, math.radians(-25.0), 0.0, 1.5),   # cabinet
        Scatterer(6.0, math.radians(15.0), 0.0, 1.0),    # table
        Scatterer(8.5, math.radians(-5.0), 0.0, 2.0),    # wall section
    )


def scene_1t_ab(seed: int = 0) -> Scene:
    """Single walker between two markers, office clutter, ghost enabled."""
    walker = _walker([(-1.5, 2.5), (1.5, 8.0)], speed=1.1)
    duration = walker.waypoints[-1][2] + 0.3
    return Scene(
        humans=(walker,),
        clutter=_office_clutter(),
        ghosts=(GhostSpec(enabled=True, mirror_x_m=3.0, attenuation_db=12.0),),
        duration_s=duration,
        seed=seed,
    )


def _fore_aft_limbs(phase: float) -> list[Limb]:
    # Limbs swing along the walking direction (+y here), keeping the lateral
    # footprint narrow; apt for side-by-side walkers.
    return [
        Limb(0.25, 0.8, 2.0, 0.0 + phase, 0.04, 0.06),
        Limb(0.25, 0.8, 2.0, math.pi + phase, -0.04, 0.06),
        Limb(0.15, 1.2, 2.0, math.pi / 2 + phase, 0.02, -0.12),
        Limb(0.15, 1.2, 2.0, 3 * math.pi / 2 + phase, -0.02, -0.12),
    ]


def scene_2t_parallel(seed: int = 0) -> Scene:
    """Two walkers side by side, 0.6 m lateral spacing, walking outbound."""
    left = HumanTarget.from_path(
        [(-0.3, 0.9), (-0.3, 9.5)], 1.2, limbs=_fore_aft_limbs(0.0)
    )
    right = HumanTarget.from_path(
        [(0.3, 0.9), (0.3, 9.5)], 1.2, limbs=_fore_aft_limbs(2.1)
    )
    duration = left.waypoints[-1][2] + 0.3
    return Scene(humans=(left, right), duration_s=duration, seed=seed)


def scene_2t_tangential(seed: int = 0) -> Scene:
    """Two walkers crossing tangentially at about 4 m, 30 cm minimum gap."""
    a = _walker([(-2.9, 4.0), (2.9, 4.0)], speed=1.0, gait_phase=0.0)
    b = _walker([(2.9, 4.3), (-2.9, 4.3)], speed=1.0, gait_phase=1.7)
    duration = a.waypoints[-1][2] + 0.3
    return Scene(humans=(a, b), duration_s=duration, seed=seed)


def scene_empty_room(seed: int = 0) -> Scene:
    """No targets; office clutter only (removed by the clutter filter)."""
    return Scene(humans=(), clutter=_office_clutter(), duration_s=10.0, seed=seed)


def scene_masking_pair(seed: int = 0, duration_s: float = 52.0) -> Scene:
    """Two pacing targets close enough in range to share a CFAR window.

    The nearer, stronger target inflates a cell-averaged background estimate
    around the weaker one, the classic masking setup.
    """

    def pacing(x, y0, y1, speed, rcs):
        # Ping-pong between y0 and y1 for the whole duration.
        leg = abs(y1 - y0) / speed
        t = 0.0
        wps = [(x, y0, t)]
        ys = (y0, y1)
        i = 0
        while t < duration_s + leg:
            t += leg
            i += 1
            wps.append((x, ys[i % 2], t))
        return HumanTarget(
            waypoints=tuple(wps),
            walking_speed_mps=speed,
            torso_rcs=rcs,
            limbs=tuple(default_limbs()),
        )

    # Same pacing speed and phase keeps the pair co-located in Doppler and at
    # a constant range gap: inside the weak target's training ring but
    # outside its guard band, so the strong return inflates a cell-averaged
    # background estimate frame after frame on both map kinds.
    strong = pacing(0.0, 3.2, 4.0, 0.5, 4.0)
    weak = pacing(0.25, 5.8, 6.6, 0.5, 0.15)
    return Scene(humans=(strong, weak), duration_s=duration_s, seed=seed)


_BUILTINS = {
    "1T_AB": scene_1t_ab,
    "2T_parallel_0p6m": scene_2t_parallel,
    "2T_tangential_4m": scene_2t_tangential,
    "empty_room": scene_empty_room,
    "masking_pair": scene_masking_pair,
}


def builtin_scenarios() -> tuple[str, ...]:
    """Names of the built-in scenes."""
    return tuple(_BUILTINS)


def make_scenario(name: str, seed: int = 0) -> Scene:
    """Instantiate a built-in scene with the given noise seed."""
    if name not in _BUILTINS:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(_BUILTINS)}")
    return _BUILTINS[name](seed=seed)
