"""Layout descriptor for encoded feature vectors.

An encoded vector is the concatenation of the one-hot categorical groups
(in order), the boolean block, and the standardized continuous block. The
layout is what ties the preprocessor, the network's output heads, and the
loss components together.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property


@dataclass(frozen=True)
class FeatureLayout:
    groups: tuple[tuple[str, int], ...]  # categorical (name, one-hot width)
    bool_names: tuple[str, ...]
    cont_names: tuple[str, ...]

    def __post_init__(self) -> None:
        names = [n for n, _ in self.groups] + list(self.bool_names) + list(self.cont_names)
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique across blocks")
        for name, size in self.groups:
            if size < 1:
                raise ValueError(f"categorical group {name!r} has width {size}")

    @cached_property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(size for _, size in self.groups)

    @cached_property
    def group_slices(self) -> tuple[slice, ...]:
        slices = []
        start = 0
        for _, size in self.groups:
            slices.append(slice(start, start + size))
            start += size
        return tuple(slices)

    @cached_property
    def cat_width(self) -> int:
        return sum(self.group_sizes)

    @cached_property
    def cat_slice(self) -> slice:
        return slice(0, self.cat_width)

    @cached_property
    def bool_slice(self) -> slice:
        return slice(self.cat_width, self.cat_width + len(self.bool_names))

    @cached_property
    def cont_slice(self) -> slice:
        start = self.cat_width + len(self.bool_names)
        return slice(start, start + len(self.cont_names))

    @property
    def n_bool(self) -> int:
        return len(self.bool_names)

    @property
    def n_cont(self) -> int:
        return len(self.cont_names)

    @cached_property
    def width(self) -> int:
        return self.cat_width + self.n_bool + self.n_cont

    def to_dict(self) -> dict:
        return {
            "groups": [[name, size] for name, size in self.groups],
            "bool_names": list(self.bool_names),
            "cont_names": list(self.cont_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureLayout":
        return cls(
            groups=tuple((str(n), int(s)) for n, s in d["groups"]),
            bool_names=tuple(d["bool_names"]),
            cont_names=tuple(d["cont_names"]),
        )
