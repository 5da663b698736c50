"""Content model: bitrate ladders, segment geometry, and the manifest."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field


class UnknownProfileError(KeyError):
    pass


class ProfileValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Representation:
    id: int
    bitrate_kbps: int
    width: int
    height: int

    def __post_init__(self):
        if self.bitrate_kbps <= 0:
            raise ProfileValidationError(f"representation {self.id}: bitrate must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ProfileValidationError(f"representation {self.id}: resolution must be positive")


@dataclass(frozen=True)
class ContentProfile:
    name: str
    representations: tuple[Representation, ...]
    segment_duration_s: float = 4.0
    total_duration_s: float = 630.0
    audio_bitrate_kbps: int = 128
    include_audio: bool = True

    def __post_init__(self):
        object.__setattr__(self, "representations", tuple(self.representations))
        self.validate()

    def validate(self):
        if not self.representations:
            raise ProfileValidationError("profile needs at least one representation")
        if self.segment_duration_s <= 0:
            raise ProfileValidationError("segment_duration_s must be positive")
        if self.total_duration_s <= 0:
            raise ProfileValidationError("total_duration_s must be positive")
        for i, rep in enumerate(self.representations):
            if rep.id != i:
                raise ProfileValidationError(f"representation ids must be contiguous from 0, got {rep.id} at {i}")
            if i > 0 and rep.bitrate_kbps <= self.representations[i - 1].bitrate_kbps:
                raise ProfileValidationError(f"bitrates must be strictly increasing (rep {i})")

    @property
    def segment_count(self) -> int:
        return math.ceil(self.total_duration_s / self.segment_duration_s)

    def segment_media_duration(self, index: int) -> float:
        """Media seconds carried by segment `index`; the last one may be shorter."""
        if not 0 <= index < self.segment_count:
            raise IndexError(f"segment index {index} out of range")
        if index == self.segment_count - 1:
            rem = self.total_duration_s - index * self.segment_duration_s
            return rem
        return self.segment_duration_s


# Bitrate ladders as published for the two industry profiles.
_FULLHD = [(400, 426, 238), (800, 640, 360), (1200, 854, 480), (2400, 1280, 720), (4800, 1920, 1080)]
_AMAZON = [
    (100, 400, 224), (150, 400, 224), (200, 512, 288), (300, 512, 288), (500, 512, 288),
    (800, 640, 360), (1200, 704, 396), (1800, 704, 396), (2400, 720, 404), (2500, 720, 404),
    (2995, 960, 540), (3000, 1280, 720), (4500, 1280, 720), (8000, 1920, 1080), (15000, 1920, 1080),
]
_BUILTIN = {"fullhd": _FULLHD, "amazon": _AMAZON}


def builtin_profile(name: str, total_duration_s: float = 630.0) -> ContentProfile:
    """Return one of the built-in content profiles ('fullhd' or 'amazon')."""
    try:
        ladder = _BUILTIN[name]
    except KeyError:
        raise UnknownProfileError(f"unknown profile {name!r}; known: {sorted(_BUILTIN)}") from None
    reps = tuple(Representation(i, b, w, h) for i, (b, w, h) in enumerate(ladder))
    return ContentProfile(name=name, representations=reps, total_duration_s=total_duration_s)


def segment_size_bytes(bitrate_kbps: float, segment_duration_s: float) -> int:
    """Nominal byte size of a segment encoded at `bitrate_kbps` lasting `segment_duration_s`."""
    if segment_duration_s <= 0:
        raise ValueError("segment duration must be positive")
    if bitrate_kbps <= 0:
        raise ValueError("bitrate must be positive")
    return round(bitrate_kbps * 1000 * segment_duration_s / 8)


def segment_payload(profile_name: str, stream_id: str, segment_index: int, size: int) -> bytes:
    """Deterministic pseudo-random segment body keyed by (profile, stream, index).

    `stream_id` is the representation id as a string, or "audio".
    """
    key = f"{profile_name}/{stream_id}/{segment_index}".encode()
    seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
    return random.Random(seed).randbytes(size)


@dataclass(frozen=True)
class Manifest:
    profile: ContentProfile
    segment_count: int
    url_template: str = "/video/{rep_id}/{segment_index}"
    audio_url_template: str = "/audio/{segment_index}"

    def video_segment_bytes(self, rep_id: int, index: int) -> int:
        rep = self.profile.representations[rep_id]
        return segment_size_bytes(rep.bitrate_kbps, self.profile.segment_media_duration(index))

    def audio_segment_bytes(self, index: int) -> int:
        return segment_size_bytes(self.profile.audio_bitrate_kbps, self.profile.segment_media_duration(index))

    def to_dict(self) -> dict:
        p = self.profile
        return {
            "manifest_version": 1,
            "name": p.name,
            "segment_duration_s": p.segment_duration_s,
            "total_duration_s": p.total_duration_s,
            "audio": {"bitrate_kbps": p.audio_bitrate_kbps} if p.include_audio else None,
            "representations": [
                {"id": r.id, "bitrate_kbps": r.bitrate_kbps, "width": r.width, "height": r.height}
                for r in p.representations
            ],
            "segment_count": self.segment_count,
            "url_template": self.url_template,
            "audio_url_template": self.audio_url_template,
        }


def build_manifest(profile: ContentProfile) -> Manifest:
    profile.validate()
    return Manifest(profile=profile, segment_count=profile.segment_count)


def manifest_from_dict(doc: dict) -> Manifest:
    if doc.get("manifest_version") != 1:
        raise ProfileValidationError(f"unsupported manifest_version {doc.get('manifest_version')!r}")
    audio = doc.get("audio")
    profile = ContentProfile(
        name=doc["name"],
        representations=tuple(
            Representation(r["id"], r["bitrate_kbps"], r["width"], r["height"])
            for r in doc["representations"]
        ),
        segment_duration_s=doc["segment_duration_s"],
        total_duration_s=doc["total_duration_s"],
        audio_bitrate_kbps=(audio or {}).get("bitrate_kbps", 128),
        include_audio=audio is not None,
    )
    return Manifest(profile=profile, segment_count=doc["segment_count"],
                    url_template=doc.get("url_template", "/video/{rep_id}/{segment_index}"),
                    audio_url_template=doc.get("audio_url_template", "/audio/{segment_index}"))
