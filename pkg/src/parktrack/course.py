"""Maneuverability-test course geometry.

The course is a straight start inside a four-pylon box, a single lane
change around a fifth pylon, and a straight run-out that ends parallel to
the start.  Distances follow the Ohio layout in feet: a 9 ft wide box
(half-width 4.5 ft = 1.3716 m) and a total run of 50 ft (15.2386 m is the
pinned end point).  Pylon placement beyond those two numbers is a
reconstruction and is configurable.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidInputError

BOX_HALF_WIDTH = 1.3716
COURSE_LENGTH = 15.2386


@dataclass(frozen=True)
class CourseGeometry:
    start_pose: tuple = (0.0, 0.0, 0.0)
    end_pose: tuple = (COURSE_LENGTH, BOX_HALF_WIDTH, math.pi)
    pylon_positions: tuple = ()
    direction_option: str = "left"

    def __post_init__(self):
        if self.direction_option not in ("left", "right"):
            raise InvalidInputError(f"direction_option must be 'left' or 'right', got {self.direction_option!r}")
        if not self.pylon_positions:
            raise InvalidInputError("course needs at least one pylon")
        dh = (self.end_pose[2] - self.start_pose[2]) % (2 * math.pi)
        if not math.isclose(dh, math.pi, abs_tol=1e-9):
            raise InvalidInputError("end heading must be the reversed start heading")

    def mirrored(self):
        """Swap the lane-change side by negating every Y coordinate."""
        flip = "right" if self.direction_option == "left" else "left"
        sx, sy, sh = self.start_pose
        ex, ey, eh = self.end_pose
        return CourseGeometry(
            start_pose=(sx, -sy, -sh),
            end_pose=(ex, -ey, (-eh) % (2 * math.pi)),
            pylon_positions=tuple((px, -py) for px, py in self.pylon_positions),
            direction_option=flip,
        )


def reference_course(direction_option="left"):
    """Default course: start box pylons A-D, lane-change pylon E."""
    w = BOX_HALF_WIDTH
    pylons = (
        (-3.048, -w), (-3.048, w),   # A, B: rear of start box
        (3.048, -w), (3.048, w),     # C, D: front of start box
        (11.5824, 0.0),              # E: straight ahead of the start
    )
    course = CourseGeometry(pylon_positions=pylons)
    return course if direction_option == "left" else course.mirrored()


def lane_change_anchors(course, turn_start=3.9, turn_end=10.9, n_turn=8, n_straight=3):
    """Sparse anchor points for the course.

    Straight runs before ``turn_start`` and after ``turn_end``; in between
    the lateral offset follows a C3 smooth step sampled at ``n_turn``
    interior points.  The smooth step only shapes the anchors; the final
    path comes from Akima densification plus the constrained fit.
    """
    x0, y0, _ = course.start_pose
    x1, y1, _ = course.end_pose
    if not (x0 < turn_start < turn_end < x1):
        raise InvalidInputError("lane change must lie strictly inside the course")
    pts = [(x, y0) for x in np.linspace(x0, turn_start, n_straight + 1)]
    for u in np.linspace(0.0, 1.0, n_turn + 2)[1:-1]:
        step = 35 * u**4 - 84 * u**5 + 70 * u**6 - 20 * u**7
        pts.append((turn_start + u * (turn_end - turn_start), y0 + step * (y1 - y0)))
    pts += [(x, y1) for x in np.linspace(turn_end, x1, n_straight + 1)]
    return np.array(pts)
