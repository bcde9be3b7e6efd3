"""
Workload files and built-in workload sets.

GEMM CSV:  ``name,M,K,N``
Conv CSV:  ``name,ifmap_h,ifmap_w,filter_h,filter_w,channels,num_filters,stride``

Both accept ``#`` comments, blank lines, surrounding whitespace and CRLF.

Built-in CNN layer lists follow the convention behind the published M/K/N
table: every convolution is modelled stride-1 and unpadded over the layer's
real output resolution (a stride-2 layer becomes a stride-1 layer on the
downsampled grid). ResNet50 is taken at a 512x512 input, which makes its stem
exactly the ``Resnet50_0_conv2d`` row (64 x 147 x 62500); YOLOv3 at 416x416,
which makes the first two downsampling convs the ``YOLO_v3_0/1`` rows.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .core import ConvLayer, GemmWorkload
from .errors import AxonSimError, ParseError, ValidationError

GEMM_HEADER = ["name", "M", "K", "N"]
CONV_HEADER = ["name", "ifmap_h", "ifmap_w", "filter_h", "filter_w", "channels",
               "num_filters", "stride"]


@dataclass(frozen=True)
class WorkloadSet:
    name: str
    gemms: tuple[GemmWorkload, ...] = ()
    convs: tuple[ConvLayer, ...] = ()
    provenance: dict[str, str] = field(default_factory=dict, compare=False)
    repeats: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        names = [w.name for w in self.gemms] + [c.name for c in self.convs]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValidationError(f"duplicate workload names in {self.name}: {dupes}")

    def __len__(self) -> int:
        return len(self.gemms) + len(self.convs)

    def get(self, name: str):
        for item in self.gemms + self.convs:
            if item.name == name:
                return item
        raise KeyError(name)

    def repeat(self, name: str) -> int:
        return self.repeats.get(name, 1)


def _rows(text: str, header: list[str]):
    """Yield (line_no, fields) for data rows, checking the header first."""
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in
             enumerate(text.replace("\r\n", "\n").replace("\r", "\n").split("\n"))]
    lines = [(no, ln) for no, ln in lines if ln]
    if not lines:
        return
    (hno, hline), body = lines[0], lines[1:]
    got = [h.strip() for h in next(csv.reader([hline]))]
    got = [h for h in got if h]
    if [h.lower() for h in got] != [h.lower() for h in header]:
        raise ParseError(f"expected header {','.join(header)}, got {hline!r}", hno)
    for no, ln in body:
        fields_ = [f.strip() for f in next(csv.reader([ln]))]
        while fields_ and fields_[-1] == "":
            fields_.pop()
        if len(fields_) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields_)}", no)
        yield no, fields_


def _int(value: str, no: int, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {value!r}", no) from None


def parse_gemm_csv(text: str, name: str = "gemm") -> WorkloadSet:
    gemms = []
    for no, (wname, m, k, n) in _rows(text, GEMM_HEADER):
        try:
            gemms.append(GemmWorkload(wname, _int(m, no, "M"), _int(k, no, "K"), _int(n, no, "N")))
        except ParseError:
            raise
        except ValidationError as exc:
            raise type(exc)(f"line {no}: {exc}") from None
    return _checked_set(name, gemms=tuple(gemms))


def parse_conv_csv(text: str, name: str = "conv") -> WorkloadSet:
    convs = []
    for no, row in _rows(text, CONV_HEADER):
        dims = [_int(v, no, h) for v, h in zip(row[1:], CONV_HEADER[1:])]
        try:
            layer = ConvLayer(row[0], *dims)
            layer.gemm_shape()  # geometry must be integral
        except ValidationError as exc:
            raise type(exc)(f"line {no}: {exc}") from None
        convs.append(layer)
    return _checked_set(name, convs=tuple(convs))


def _checked_set(name, **kw) -> WorkloadSet:
    try:
        return WorkloadSet(name, **kw)
    except ValidationError as exc:
        raise ParseError(str(exc)) from None


def serialize_gemm_csv(wset: WorkloadSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GEMM_HEADER)
    for g in wset.gemms:
        w.writerow([g.name, g.m, g.k, g.n])
    return buf.getvalue()


def serialize_conv_csv(wset: WorkloadSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONV_HEADER)
    for c in wset.convs:
        w.writerow([c.name, c.ifmap_h, c.ifmap_w, c.filter_h, c.filter_w, c.channels,
                    c.num_filters, c.stride])
    return buf.getvalue()


TABLE3 = [
    ("TFO", 31999, 84, 1024),
    ("TF1", 84, 4096, 1024),
    ("GNMTO", 128, 4096, 2048),
    ("GNMT1", 2048, 32, 4096),
    ("GPT3_0", 1024, 1024, 80),
    ("GPT3_1", 1024, 2560, 7680),
    ("GPT3_2", 1024, 2560, 10240),
    ("GPT3_3", 1024, 2560, 50257),
    ("NCF0", 2048, 128, 1),
    ("NCF1", 256, 2048, 256),
    ("DB0", 1024, 50000, 16),
    ("DB1", 35, 2560, 4096),
    ("Resnet50_0_conv2d", 64, 147, 62500),
    ("Resnet50_1_conv2d", 512, 4608, 676),
    ("YOLO_v3_0_conv2d", 64, 288, 42436),
    ("YOLO_v3_1_conv2d", 128, 576, 10404),
    ("GEMM_0", 128, 10, 128),
    ("GEMM_1", 2048, 10, 2048),
    ("GEMM_2", 1024, 1024, 128),
    ("GEMM_3", 64, 2560, 2560),
]

_TABLE3_NOTES = {
    "GPT3_0": "GPT3 matmul0", "GPT3_1": "GPT3 matmul1", "GPT3_2": "GPT3 addmm",
    "GPT3_3": "GPT3 lmhead",
}



def _conv_on(name, ifmap, f, cin, cout) -> ConvLayer:
    return ConvLayer(name, ifmap, ifmap, f, f, cin, cout, 1)


def resnet50_layers(input_size: int = 512) -> list[ConvLayer]:
    """The 53 convolutions of ResNet-50 v1.5 (bottleneck stride on the 3x3)."""
    layers = [_conv_on("conv1", input_size // 2, 7, 3, 64)]
    in_ch, res = 64, input_size // 4
    for stage, (width, blocks) in enumerate([(64, 3), (128, 4), (256, 6), (512, 3)], start=2):
        for b in range(blocks):
            tag = f"res{stage}{chr(ord('a') + b)}"
            in_res = res
            if b == 0 and stage > 2:
                res //= 2
            layers.append(_conv_on(f"{tag}_branch2a", in_res, 1, in_ch, width))
            layers.append(_conv_on(f"{tag}_branch2b", res, 3, width, width))
            layers.append(_conv_on(f"{tag}_branch2c", res, 1, width, 4 * width))
            if b == 0:
                layers.append(_conv_on(f"{tag}_branch1", res, 1, in_ch, 4 * width))
            in_ch = 4 * width
    return layers


def yolov3_layers(input_size: int = 416) -> list[ConvLayer]:
    """The 75 convolutions of YOLOv3 (Darknet-53 backbone plus three detection heads)."""
    layers = [_conv_on("conv0", input_size, 3, 3, 32)]
    ch, res = 32, input_size
    for stage, (out, nres) in enumerate([(64, 1), (128, 2), (256, 8), (512, 8), (1024, 4)]):
        res //= 2
        layers.append(_conv_on(f"down{stage}", res, 3, ch, out))
        ch = out
        for r in range(nres):
            layers.append(_conv_on(f"s{stage}r{r}_1x1", res, 1, ch, ch // 2))
            layers.append(_conv_on(f"s{stage}r{r}_3x3", res, 3, ch // 2, ch))

    def head(tag, res, in_ch, mid):
        for i in range(3):
            layers.append(_conv_on(f"{tag}_{i}_1x1", res, 1, in_ch if i == 0 else 2 * mid, mid))
            layers.append(_conv_on(f"{tag}_{i}_3x3", res, 3, mid, 2 * mid))
        layers.append(_conv_on(f"{tag}_out", res, 1, 2 * mid, 255))

    base = input_size // 32
    head("head13", base, 1024, 512)
    layers.append(_conv_on("route13_1x1", base, 1, 512, 256))
    head("head26", 2 * base, 768, 256)
    layers.append(_conv_on("route26_1x1", 2 * base, 1, 256, 128))
    head("head52", 4 * base, 384, 128)
    return layers


GEMV_SHAPES = [
    ("NCF0_gemv", 2048, 128, 1, "NCF0 row of the M/K/N table (N=1)"),
    ("GPT3_qkv_gemv", 7680, 2560, 1, "GPT3 QKV projection, single-token decode"),
    ("GPT3_ffn_up_gemv", 10240, 2560, 1, "GPT3 FFN up-projection, single-token decode"),
    ("GPT3_lmhead_gemv", 50257, 2560, 1, "GPT3 LM head, single-token decode"),
    ("BERT_ffn_gemv", 3072, 768, 1, "BERT-base FFN, single token"),
]

# MobileNetV2 depthwise 3x3 layers: (output resolution, channels)
MOBILENET_V2_DW = [(112, 32), (112, 96), (56, 144), (56, 144), (28, 192), (28, 192),
                   (28, 192), (14, 384), (14, 384), (14, 384), (14, 384), (14, 576),
                   (14, 576), (7, 960), (7, 960), (7, 960)]


def gemv_dw_set() -> WorkloadSet:
    gemms, notes, repeats = [], {}, {}
    for name, m, k, n, note in GEMV_SHAPES:
        gemms.append(GemmWorkload(name, m, k, n))
        notes[name] = note
    convs = []
    for i, (res, ch) in enumerate(MOBILENET_V2_DW):
        name = f"mbv2_dw{i}"
        # one channel of a depthwise conv: M=1, K=9, N=res^2; repeated per channel
        gemms.append(GemmWorkload(name, 1, 9, res * res))
        convs.append(_conv_on(f"{name}_ch", res, 3, 1, 1))
        notes[name] = f"MobileNetV2 depthwise 3x3 at {res}x{res}, {ch} channels"
        repeats[name] = repeats[f"{name}_ch"] = ch
    return WorkloadSet("gemv_dw", tuple(gemms), tuple(convs), notes, repeats)


BUILTIN_SETS = ("table3", "resnet50_conv", "yolov3_conv", "gemv_dw")


def builtin(set_name: str) -> WorkloadSet:
    if set_name == "table3":
        gemms = tuple(GemmWorkload(*row) for row in TABLE3)
        notes = {g.name: _TABLE3_NOTES.get(g.name, "M/K/N table") for g in gemms}
        return WorkloadSet("table3", gemms, (), notes)
    if set_name == "resnet50_conv":
        convs = tuple(resnet50_layers())
        return WorkloadSet(set_name, (), convs,
                           {c.name: "ResNet-50 v1.5, 512x512 input, stride-1 unpadded" for c in convs})
    if set_name == "yolov3_conv":
        convs = tuple(yolov3_layers())
        return WorkloadSet(set_name, (), convs,
                           {c.name: "YOLOv3, 416x416 input, stride-1 unpadded" for c in convs})
    if set_name == "gemv_dw":
        return gemv_dw_set()
    raise AxonSimError(f"unknown built-in set {set_name!r}; choose from {', '.join(BUILTIN_SETS)}")


def conv_as_gemm(layer: ConvLayer) -> GemmWorkload:
    m, k, n = layer.gemm_shape()
    return GemmWorkload(layer.name, m, k, n)


def load(source: str, kind: str = "gemm") -> WorkloadSet:
    """Resolve ``builtin:<name>`` or a CSV path. Conv files are accepted for GEMM use too."""
    if source.startswith("builtin:"):
        wset = builtin(source.split(":", 1)[1])
        if kind == "gemm" and not wset.gemms and wset.convs:
            return WorkloadSet(wset.name, tuple(conv_as_gemm(c) for c in wset.convs), (),
                               wset.provenance, wset.repeats)
        return wset
    with open(source, encoding="utf-8", newline="") as fh:
        text = fh.read()
    first = next((ln for ln in text.splitlines() if ln.split("#", 1)[0].strip()), "")
    if first.lower().replace(" ", "").startswith("name,ifmap_h"):
        wset = parse_conv_csv(text, source)
        if kind == "gemm":
            return WorkloadSet(wset.name, tuple(conv_as_gemm(c) for c in wset.convs))
        return wset
    return parse_gemm_csv(text, source)
