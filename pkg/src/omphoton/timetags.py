"""Detector time-tag ingestion, pulse-window gating and coincidence
estimators.

Streams carry (channel, timestamp) records from two threshold detectors
(channels 0 and 1).  A gate configuration slices each repetition period
into named windows (write, read, read2, dark); detection is threshold
per (period, window, channel), so duplicate events collapse to one
click.  Estimators count period-wise coincidences and report binomial
errors.
"""

import io
import json
import warnings
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

EVENT_DTYPE = np.dtype([("channel", "u1"), ("t_ps", "u8")])
# on-disk binary record: u8 channel byte + little-endian u64 picoseconds
_RECORD_DTYPE = np.dtype(
    {"names": ["channel", "t_ps"], "formats": ["u1", "<u8"], "offsets": [0, 1],
     "itemsize": 9}
)
MAGIC = b"TTG1"
CSV_HEADER = "channel,t_ps"
WINDOW_LABELS = ("write", "read", "read2", "dark")

TimeTagEvent = namedtuple("TimeTagEvent", "channel t_ps")


class TimeTagFormatError(ValueError):
    """Malformed time-tag input; the message carries the position."""


def _as_bytes(source):
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")
        return data
    raise TypeError("source must be bytes or a binary file object")


def parse_timetags(source, format="csv"):
    """Parse a byte stream into an ordered event array.

    Returns a numpy structured array with fields channel (u1) and t_ps
    (u8).  Non-monotonic timestamps are tolerated with a warning and a
    stable sort; malformed content raises TimeTagFormatError naming the
    offending line or record.
    """
    data = _as_bytes(source)
    if format == "csv":
        events = _parse_csv(data)
    elif format == "binary":
        events = _parse_binary(data)
    else:
        raise ValueError("format must be 'csv' or 'binary'")
    if len(events) > 1 and (np.diff(events["t_ps"].astype(np.int64)) < 0).any():
        warnings.warn("timestamps not nondecreasing; applying stable sort")
        events = events[np.argsort(events["t_ps"], kind="stable")]
    return events


def _parse_csv(data):
    text = data.decode("utf-8")
    lines = text.splitlines()
    if not lines:
        return np.empty(0, dtype=EVENT_DTYPE)
    if lines[0].strip() != CSV_HEADER:
        raise TimeTagFormatError(
            "line 1: expected header %r, got %r" % (CSV_HEADER, lines[0].strip())
        )
    out = np.empty(len(lines) - 1, dtype=EVENT_DTYPE)
    n = 0
    for i, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TimeTagFormatError("line %d: expected 'channel,t_ps'" % i)
        try:
            ch = int(parts[0])
            t = int(parts[1])
        except ValueError:
            raise TimeTagFormatError("line %d: non-integer field in %r" % (i, line))
        if ch not in (0, 1):
            raise TimeTagFormatError("line %d: channel must be 0 or 1, got %d" % (i, ch))
        if t < 0:
            raise TimeTagFormatError("line %d: negative timestamp" % i)
        out[n] = (ch, t)
        n += 1
    return out[:n]


def _parse_binary(data):
    if len(data) == 0:
        return np.empty(0, dtype=EVENT_DTYPE)
    if len(data) < 12 or data[:4] != MAGIC:
        raise TimeTagFormatError("bad magic: expected %r at offset 0" % (MAGIC,))
    count = int(np.frombuffer(data[4:12], dtype="<u8")[0])
    payload = data[12:]
    if len(payload) != count * _RECORD_DTYPE.itemsize:
        raise TimeTagFormatError(
            "declared %d records but payload holds %d bytes (%d records)"
            % (count, len(payload), len(payload) // _RECORD_DTYPE.itemsize)
        )
    rec = np.frombuffer(payload, dtype=_RECORD_DTYPE)
    bad = np.nonzero(rec["channel"] > 1)[0]
    if len(bad):
        raise TimeTagFormatError(
            "record %d: channel must be 0 or 1, got %d"
            % (bad[0], rec["channel"][bad[0]])
        )
    out = np.empty(count, dtype=EVENT_DTYPE)
    out["channel"] = rec["channel"]
    out["t_ps"] = rec["t_ps"]
    return out


def write_timetags(events, format="csv"):
    """Serialize an event array to bytes in either stream format."""
    events = np.asarray(events, dtype=EVENT_DTYPE)
    if format == "csv":
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for ch, t in zip(events["channel"], events["t_ps"]):
            buf.write("%d,%d\n" % (ch, t))
        return buf.getvalue().encode("utf-8")
    if format == "binary":
        rec = np.empty(len(events), dtype=_RECORD_DTYPE)
        rec["channel"] = events["channel"]
        rec["t_ps"] = events["t_ps"]
        return MAGIC + np.uint64(len(events)).astype("<u8").tobytes() + rec.tobytes()
    raise ValueError("format must be 'csv' or 'binary'")


@dataclass(frozen=True)
class Window:
    label: str
    offset: int
    width: int


@dataclass(frozen=True)
class GateConfig:
    """Repetition period and named windows, all integer picoseconds.

    n_max bounds |dn| for satellite analysis.
    """

    t_rep: int
    windows: tuple
    n_max: int = 10

    def __post_init__(self):
        object.__setattr__(
            self,
            "windows",
            tuple(
                w if isinstance(w, Window) else Window(str(w[0]), int(w[1]), int(w[2]))
                for w in self.windows
            ),
        )
        if self.t_rep <= 0:
            raise ValueError("t_rep must be > 0")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        seen = set()
        for w in self.windows:
            if w.label not in WINDOW_LABELS:
                raise ValueError(
                    "window label %r not in %r" % (w.label, WINDOW_LABELS)
                )
            if w.label in seen:
                raise ValueError("duplicate window label %r" % w.label)
            seen.add(w.label)
            if w.width <= 0:
                raise ValueError("window %r width must be > 0" % w.label)
            if w.offset < 0 or w.offset + w.width > self.t_rep:
                raise ValueError("window %r outside the period" % w.label)
        ordered = sorted(self.windows, key=lambda w: w.offset)
        for a, b in zip(ordered, ordered[1:]):
            if a.offset + a.width > b.offset:
                raise ValueError(
                    "windows %r and %r overlap" % (a.label, b.label)
                )

    def window(self, label):
        for w in self.windows:
            if w.label == label:
                return w
        raise KeyError("no window labeled %r" % label)

    def has(self, label):
        return any(w.label == label for w in self.windows)

    def to_dict(self):
        return {
            "t_rep_ps": self.t_rep,
            "windows": [
                {"label": w.label, "offset_ps": w.offset, "width_ps": w.width}
                for w in self.windows
            ],
            "n_max": self.n_max,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            wins = tuple(
                Window(str(w["label"]), int(w["offset_ps"]), int(w["width_ps"]))
                for w in d["windows"]
            )
            return cls(t_rep=int(d["t_rep_ps"]), windows=wins,
                       n_max=int(d.get("n_max", 10)))
        except KeyError as e:
            raise KeyError("gate config missing key %s" % e) from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CorrelationEstimate:
    """Estimator output: value, one-sigma error, and the raw numerator
    and denominator (trial) counts behind it."""

    value: float
    error: float
    num_counts: int
    den_counts: int


class ClickTable:
    """Threshold clicks per (window label, channel), as sorted arrays of
    period indices relative to the first observed period."""

    def __init__(self, n_periods, clicks, cfg):
        self.n_periods = int(n_periods)
        self.clicks = clicks
        self.cfg = cfg

    def periods(self, label, channel=None):
        """Sorted unique period indices with a click in the window; with
        channel=None, on either channel."""
        if channel is not None:
            return self.clicks.get((label, int(channel)), _EMPTY)
        a = self.clicks.get((label, 0), _EMPTY)
        b = self.clicks.get((label, 1), _EMPTY)
        return np.union1d(a, b)

    def has(self, label):
        return self.cfg.has(label)


_EMPTY = np.empty(0, dtype=np.int64)


def gate_events(events, cfg):
    """Assign events to (period, window, channel) and collapse to
    threshold clicks.  Events between windows are dropped."""
    events = np.asarray(events, dtype=EVENT_DTYPE)
    clicks = {}
    if len(events) == 0:
        for w in cfg.windows:
            for c in (0, 1):
                clicks[(w.label, c)] = _EMPTY
        return ClickTable(0, clicks, cfg)
    t = events["t_ps"].astype(np.int64)
    ch = events["channel"]
    period = t // cfg.t_rep
    offset = t - period * cfg.t_rep
    p0 = int(period.min())
    n_periods = int(period.max()) - p0 + 1
    for w in cfg.windows:
        inw = (offset >= w.offset) & (offset < w.offset + w.width)
        for c in (0, 1):
            sel = inw & (ch == c)
            clicks[(w.label, c)] = np.unique(period[sel] - p0).astype(np.int64)
    return ClickTable(n_periods, clicks, cfg)


def merge_tables(tables):
    """Concatenate click tables from successive acquisitions, offsetting
    period indices so the streams do not alias."""
    tables = list(tables)
    if not tables:
        raise ValueError("no tables to merge")
    cfg = tables[0].cfg
    keys = set()
    for tb in tables:
        keys.update(tb.clicks.keys())
    out = {}
    shift = 0
    total = 0
    parts = {k: [] for k in keys}
    for tb in tables:
        for k in keys:
            arr = tb.clicks.get(k, _EMPTY)
            if len(arr):
                parts[k].append(arr + shift)
        shift += tb.n_periods
        total += tb.n_periods
    for k in keys:
        out[k] = (
            np.concatenate(parts[k]).astype(np.int64) if parts[k] else _EMPTY
        )
    return ClickTable(total, out, cfg)


def binomial_error(k, m):
    """One-sigma uncertainty on a proportion k/m.

    Normal approximation sqrt(p(1-p)/m); for small numerators (k < 20)
    the Wilson interval half-width at z=1, which stays meaningful at
    k = 0.
    """
    if m <= 0:
        raise ValueError("m must be > 0")
    k = float(k)
    m = float(m)
    p = k / m
    if k >= 20:
        return float(np.sqrt(p * (1.0 - p) / m))
    # Wilson half-width, z = 1
    return float(np.sqrt(p * (1.0 - p) / m + 1.0 / (4.0 * m * m)) / (1.0 + 1.0 / m))


def _pairs(base, other, dn):
    """Periods n with n in base and n+dn in other."""
    if dn == 0:
        return np.intersect1d(base, other, assume_unique=False)
    return np.intersect1d(base, other - dn, assume_unique=False)


def heralded_g2(table, dn_range=None):
    """Heralded readout autocorrelation versus pulse-sequence shift dn.

    Conditioned on write clicks in periods n and n+dn, the coincidence
    of detector-0 read clicks at n with detector-1 read clicks at n+dn
    (both detector orderings averaged) is normalized by the product of
    the herald-conditioned singles probabilities.  Returns a dict
    dn -> CorrelationEstimate; dn=0 is the single-photon purity figure.
    """
    if not (table.has("write") and table.has("read")):
        raise ValueError("heralded_g2 needs write and read windows")
    if dn_range is None:
        dn_range = table.cfg.n_max
    W = table.periods("write")
    nw = len(W)
    if nw == 0:
        raise ValueError("no write clicks to herald on")
    R = {c: np.intersect1d(W, table.periods("read", c)) for c in (0, 1)}
    p_single = {c: len(R[c]) / nw for c in (0, 1)}
    if p_single[0] <= 0.0 or p_single[1] <= 0.0:
        raise ValueError("a read detector saw no heralded clicks")
    e_single = {c: binomial_error(len(R[c]), nw) for c in (0, 1)}
    out = {}
    for dn in range(-dn_range, dn_range + 1):
        both = _pairs(W, W, dn)
        m = len(both)
        if dn == 0:
            num = len(_pairs(R[0], R[1], 0))
            den = m
        else:
            k_a = len(_pairs(np.intersect1d(both, R[0]), R[1], dn))
            k_b = len(_pairs(np.intersect1d(both, R[1]), R[0], dn))
            num = k_a + k_b
            den = 2 * m
        if den == 0:
            out[dn] = CorrelationEstimate(float("nan"), float("nan"), 0, 0)
            continue
        p_joint = num / den
        value = p_joint / (p_single[0] * p_single[1])
        sig = binomial_error(num, den)
        if p_joint > 0.0:
            rel = np.sqrt(
                (sig / p_joint) ** 2
                + (e_single[0] / p_single[0]) ** 2
                + (e_single[1] / p_single[1]) ** 2
            )
            err = value * float(rel)
        else:
            err = sig / (p_single[0] * p_single[1])
        out[dn] = CorrelationEstimate(float(value), float(err), int(num), int(den))
    return out


def cross_g2(table):
    """Same-period write/read click cross-correlation
    g2 = P(write and read) / (P(write) P(read))."""
    if not (table.has("write") and table.has("read")):
        raise ValueError("cross_g2 needs write and read windows")
    n = table.n_periods
    if n == 0:
        raise ValueError("empty click table")
    W = table.periods("write")
    R = table.periods("read")
    if len(W) == 0 or len(R) == 0:
        raise ValueError("no clicks in write or read window")
    c = len(np.intersect1d(W, R))
    p_w = len(W) / n
    p_r = len(R) / n
    p_c = c / n
    value = p_c / (p_w * p_r)
    if p_c > 0.0:
        rel = np.sqrt(
            (binomial_error(c, n) / p_c) ** 2
            + (binomial_error(len(W), n) / p_w) ** 2
            + (binomial_error(len(R), n) / p_r) ** 2
        )
        err = value * float(rel)
    else:
        err = binomial_error(c, n) / (p_w * p_r)
    return CorrelationEstimate(float(value), float(err), int(c), int(n))


def hom_coincidences(table, mode="fourfold"):
    """Interference coincidences versus pulse-sequence shift dn,
    normalized to the satellite (dn != 0) average.

    Heralds are write-window clicks; the herald multiplicity is the
    number of write channels that clicked (fourfold requires both,
    threefold exactly one).  The interference coincidence is a click on
    each channel of the second readout window (the early/late overlap
    bin).  Both periods of a dn pair must carry the required herald
    multiplicity.
    """
    if mode not in ("fourfold", "threefold"):
        raise ValueError("mode must be 'fourfold' or 'threefold'")
    for label in ("write", "read", "read2"):
        if not table.has(label):
            raise ValueError("hom_coincidences needs write, read and read2 windows")
    w0 = table.periods("write", 0)
    w1 = table.periods("write", 1)
    both = np.intersect1d(w0, w1)
    if mode == "fourfold":
        cond = both
    else:
        cond = np.setdiff1d(np.union1d(w0, w1), both)
    A = np.intersect1d(cond, table.periods("read2", 0))
    B = np.intersect1d(cond, table.periods("read2", 1))
    nmax = table.cfg.n_max
    nums = {}
    dens = {}
    for dn in range(-nmax, nmax + 1):
        m = len(_pairs(cond, cond, dn))
        if dn == 0:
            nums[dn] = len(_pairs(A, B, 0))
            dens[dn] = m
        else:
            nums[dn] = len(_pairs(A, B, dn)) + len(_pairs(B, A, dn))
            dens[dn] = 2 * m
    sat_num = sum(nums[dn] for dn in nums if dn != 0)
    sat_den = sum(dens[dn] for dn in dens if dn != 0)
    if sat_num == 0 or sat_den == 0:
        raise ValueError("satellite bins are empty; cannot normalize")
    sat_rate = sat_num / sat_den
    sat_rel = binomial_error(sat_num, sat_den) / sat_rate
    out = {}
    for dn in sorted(nums):
        num, den = nums[dn], dens[dn]
        if den == 0:
            out[dn] = CorrelationEstimate(float("nan"), float("nan"), 0, 0)
            continue
        rate = num / den
        value = rate / sat_rate
        sig = binomial_error(num, den)
        if rate > 0.0:
            err = value * float(np.sqrt((sig / rate) ** 2 + sat_rel ** 2))
        else:
            err = sig / sat_rate
        out[dn] = CorrelationEstimate(float(value), float(err), int(num), int(den))
    return out


def dark_count_fraction(table):
    """Accidental-coincidence fraction: write/dark coincidences divided
    by write/read coincidences."""
    if not table.has("dark"):
        raise ValueError("no dark window configured")
    if not (table.has("write") and table.has("read")):
        raise ValueError("dark_count_fraction needs write and read windows")
    W = table.periods("write")
    c_dark = len(np.intersect1d(W, table.periods("dark")))
    if c_dark == 0:
        return 0.0
    c_sig = len(np.intersect1d(W, table.periods("read")))
    if c_sig == 0:
        raise ValueError("no signal coincidences to normalize by")
    return c_dark / c_sig
