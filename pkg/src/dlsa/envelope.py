"""Binary wire format for the single worker-to-master message.

Little-endian layout, 8-byte IEEE floats, with an 8-byte keyed-hash checksum
over everything that precedes it:

    u32  schema_version (currently 1)
    u8   family tag  u8 cutpoint count  u8 tie-method tag  u8 reserved
    i64  partition id
    u64  local sample count n_k
    u32  parameter dimension q
    f64[q]    estimate (coefficients, then cutpoints)
    f64[q*q]  scaled inverse covariance, row major
    u64  checksum

Total size is 36 + 8q + 8q^2 bytes.  Decoding verifies the checksum and the
declared length, so a corrupted or truncated file is rejected rather than
silently combined.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import ChecksumMismatch, InputError
from .families import LocalSummary, ModelFamily, ParamVector

SCHEMA_VERSION = 1

_HEADER = struct.Struct("<IBBBBqQI")
_FAMILY_TAGS = {"linear": 0, "logistic": 1, "poisson": 2, "cox": 3,
                "ordered-probit": 4}
_FAMILY_FROM_TAG = {v: k for k, v in _FAMILY_TAGS.items()}
_TIE_TAGS = {None: 0, "breslow": 1}
_TIE_FROM_TAG = {v: k for k, v in _TIE_TAGS.items()}


def envelope_nbytes(q: int) -> int:
    return _HEADER.size + 8 * q + 8 * q * q + 8


def _digest(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


@dataclass(frozen=True, eq=False)
class SummaryEnvelope:
    """Decoded view of one worker message."""

    schema_version: int
    partition_id: int
    n_k: int
    family: ModelFamily
    q: int
    theta_hat: np.ndarray
    precision: np.ndarray
    checksum: int

    @classmethod
    def from_summary(cls, summary: LocalSummary, family: ModelFamily) -> "SummaryEnvelope":
        theta = summary.theta_hat.as_array()
        body = cls(
            schema_version=SCHEMA_VERSION,
            partition_id=int(summary.partition_id),
            n_k=int(summary.n_k),
            family=family,
            q=theta.size,
            theta_hat=theta,
            precision=np.asarray(summary.precision, dtype=np.float64),
            checksum=0,
        )
        payload = body._payload()
        object.__setattr__(body, "checksum",
                           int.from_bytes(_digest(payload), "little"))
        return body

    def _payload(self) -> bytes:
        header = _HEADER.pack(
            self.schema_version,
            _FAMILY_TAGS[self.family.kind],
            self.family.num_cutpoints or 0,
            _TIE_TAGS[self.family.tie_method],
            0,
            self.partition_id,
            self.n_k,
            self.q,
        )
        return (header
                + self.theta_hat.astype("<f8").tobytes()
                + self.precision.astype("<f8").tobytes())

    def encode(self) -> bytes:
        payload = self._payload()
        return payload + _digest(payload)

    @classmethod
    def decode(cls, buf: bytes) -> "SummaryEnvelope":
        if len(buf) < _HEADER.size + 8:
            raise InputError("worker summary is truncated")
        version, fam_tag, ncut, tie_tag, _, pid, n_k, q = \
            _HEADER.unpack_from(buf, 0)
        if version != SCHEMA_VERSION:
            raise InputError(f"unsupported summary schema version {version}")
        if len(buf) != envelope_nbytes(q):
            raise InputError(
                f"worker summary has {len(buf)} bytes, expected {envelope_nbytes(q)}")
        payload, checksum = buf[:-8], buf[-8:]
        if _digest(payload) != checksum:
            raise ChecksumMismatch("worker summary failed its checksum")
        if fam_tag not in _FAMILY_FROM_TAG:
            raise InputError(f"unknown family tag {fam_tag}")
        if tie_tag not in _TIE_FROM_TAG:
            raise InputError(f"unknown tie-method tag {tie_tag}")
        kind = _FAMILY_FROM_TAG[fam_tag]
        try:
            family = ModelFamily(
                kind,
                num_cutpoints=ncut if kind == "ordered-probit" else None,
                tie_method=_TIE_FROM_TAG[tie_tag] if kind == "cox" else None,
            )
        except ValueError as exc:
            raise InputError(f"invalid family metadata: {exc}")
        off = _HEADER.size
        theta = np.frombuffer(buf, dtype="<f8", count=q, offset=off).copy()
        prec = np.frombuffer(buf, dtype="<f8", count=q * q,
                             offset=off + 8 * q).reshape(q, q).copy()
        return cls(
            schema_version=version, partition_id=pid, n_k=n_k, family=family,
            q=q, theta_hat=theta, precision=prec,
            checksum=int.from_bytes(checksum, "little"),
        )

    def to_summary(self) -> LocalSummary:
        ncut = self.family.num_cutpoints if self.family.kind == "ordered-probit" else 0
        return LocalSummary(
            theta_hat=ParamVector.from_array(self.theta_hat, ncut or 0),
            precision=self.precision,
            n_k=self.n_k,
            partition_id=self.partition_id,
        )


def encode_summary(summary: LocalSummary, family: ModelFamily) -> bytes:
    return SummaryEnvelope.from_summary(summary, family).encode()


def decode_summary(buf: bytes) -> tuple[LocalSummary, ModelFamily]:
    env = SummaryEnvelope.decode(buf)
    return env.to_summary(), env.family
