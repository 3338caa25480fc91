"""Mesh, point-array and label files: OFF, OBJ, NPY and label sidecars."""
import io
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import ParseError
from gsgw.repositories.base import BaseRepository, PathLike
from gsgw.schemas.geometry import LabeledCloud, Mesh, MeshFormat
from gsgw.schemas.measures import PointCloud

logger = get_logger(__name__)

NPY_MAGIC = b"\x93NUMPY"
NPY_DTYPES = (np.dtype("<f4"), np.dtype("<f8"))
LABELS_SUFFIX = ".labels.txt"


def _fan(polygon: List[int]) -> List[Tuple[int, int, int]]:
    return [(polygon[0], polygon[k], polygon[k + 1]) for k in range(1, len(polygon) - 1)]


def _content_lines(text: str):
    """(line number, tokens) of non-blank lines, comments stripped."""
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            yield number, tokens


def _floats(tokens, count: int, path: str, line: int) -> List[float]:
    if len(tokens) < count:
        raise ParseError(f"expected {count} coordinates, got {len(tokens)}", path=path, line=line)
    try:
        return [float(tok) for tok in tokens[:count]]
    except ValueError as exc:
        raise ParseError(f"bad number: {exc}", path=path, line=line) from exc


def parse_off(text: str, path: str = "<off>") -> Mesh:
    """
    Parse ASCII OFF: an optional OFF line, "nv nf ne", nv vertices, nf faces "k i1 ... ik".

    Raises:
        ParseError: On a malformed header, count, coordinate or index, with its line
    """
    lines = iter(_content_lines(text))
    try:
        number, tokens = next(lines)
        if tokens[0].upper() == "OFF":
            tokens = tokens[1:]
            if not tokens:
                number, tokens = next(lines)
        try:
            nv, nf = int(tokens[0]), int(tokens[1])
        except (ValueError, IndexError) as exc:
            raise ParseError("expected counts 'nv nf ne'", path=path, line=number) from exc
        if nv < 1 or nf < 0:
            raise ParseError(f"invalid counts {nv} {nf}", path=path, line=number)

        vertices = []
        for _ in range(nv):
            number, tokens = next(lines)
            vertices.append(_floats(tokens, 3, path, number))
        faces = []
        for _ in range(nf):
            number, tokens = next(lines)
            try:
                k = int(tokens[0])
                polygon = [int(tok) for tok in tokens[1:k + 1]]
            except ValueError as exc:
                raise ParseError(f"bad face record: {exc}", path=path, line=number) from exc
            if k < 3 or len(polygon) != k:
                raise ParseError(f"face declares {k} vertices, lists {len(polygon)}", path=path, line=number)
            if min(polygon) < 0 or max(polygon) >= nv:
                raise ParseError(f"face index out of range [0, {nv})", path=path, line=number)
            faces.extend(_fan(polygon))
    except StopIteration:
        raise ParseError("file ends before the declared vertices and faces", path=path) from None

    return Mesh(PointCloud(np.array(vertices)), np.array(faces, dtype=np.int64).reshape(-1, 3),
                MeshFormat.OFF)


def _obj_index(token: str, nv: int, path: str, line: int) -> int:
    try:
        idx = int(token.split("/", 1)[0])
    except ValueError as exc:
        raise ParseError(f"bad face index {token!r}", path=path, line=line) from exc
    idx = idx - 1 if idx > 0 else nv + idx
    if not 0 <= idx < nv:
        raise ParseError(f"face index {token!r} out of range", path=path, line=line)
    return idx


def parse_obj(text: str, path: str = "<obj>") -> Mesh:
    """
    Parse the "v" and "f" records of an OBJ file; other records are ignored.

    Indices are 1-based (negative ones count back from the last vertex);
    polygons are fan-triangulated.
    """
    vertices, faces, pending = [], [], []
    for number, tokens in _content_lines(text):
        if tokens[0] == "v":
            vertices.append(_floats(tokens[1:], 3, path, number))
        elif tokens[0] == "f":
            if len(tokens) < 4:
                raise ParseError("a face needs at least 3 vertices", path=path, line=number)
            pending.append((number, tokens[1:], len(vertices)))
    if not vertices:
        raise ParseError("no vertex records", path=path)
    for number, tokens, nv in pending:
        faces.extend(_fan([_obj_index(tok, nv, path, number) for tok in tokens]))
    return Mesh(PointCloud(np.array(vertices)), np.array(faces, dtype=np.int64).reshape(-1, 3),
                MeshFormat.OBJ)


def parse_npy(data: bytes, path: str = "<npy>") -> np.ndarray:
    """
    Read an NPY 1.0 file holding a C-order little-endian float32/float64 2-D array.

    Raises:
        ParseError: With the byte offset of the first violation
    """
    if data[:len(NPY_MAGIC)] != NPY_MAGIC:
        raise ParseError("not an NPY file (bad magic)", path=path, offset=0)
    stream = io.BytesIO(data)
    try:
        version = np.lib.format.read_magic(stream)
    except ValueError as exc:
        raise ParseError(f"bad NPY version: {exc}", path=path, offset=6) from exc
    if version != (1, 0):
        raise ParseError(f"NPY version {version} is not supported, need 1.0", path=path, offset=6)
    try:
        shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(stream)
    except ValueError as exc:
        raise ParseError(f"bad NPY header: {exc}", path=path, offset=8) from exc
    if fortran_order:
        raise ParseError("fortran_order arrays are not supported", path=path, offset=8)
    if len(shape) != 2:
        raise ParseError(f"expected a 2-D array, got shape {shape}", path=path, offset=8)
    if dtype not in NPY_DTYPES:
        raise ParseError(f"dtype {dtype.str} is not little-endian float32/float64", path=path, offset=8)
    start = stream.tell()
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(data) - start != expected:
        raise ParseError(f"payload holds {len(data) - start} bytes, header promises {expected}",
                         path=path, offset=start)
    return np.frombuffer(data, dtype=dtype, offset=start).reshape(shape).astype(np.float64)


def encode_npy(array) -> bytes:
    """NPY 1.0 bytes of a little-endian float64 C-order array."""
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, arr, version=(1, 0), allow_pickle=False)
    return buffer.getvalue()


class MeshRepository(BaseRepository):
    """Loads and stores meshes, point arrays and part labels."""

    def load_mesh(self, name: PathLike, fmt: Optional[MeshFormat] = None) -> Mesh:
        """
        Load a mesh or point cloud, the format taken from the suffix by default.

        Raises:
            ParseError: If the file is missing, the suffix unknown or the grammar violated
        """
        path = self.resolve(name)
        if fmt is None:
            try:
                fmt = MeshFormat(path.suffix.lower().lstrip("."))
            except ValueError:
                raise ParseError(f"unknown mesh format {path.suffix!r}", path=str(path)) from None
        fmt = MeshFormat(fmt)
        if fmt is MeshFormat.NPY:
            mesh = Mesh(PointCloud(self.read_npy(path)), None, MeshFormat.NPY)
        elif fmt is MeshFormat.OFF:
            mesh = parse_off(self.read_text(path), str(path))
        else:
            mesh = parse_obj(self.read_text(path), str(path))
        logger.info(
            f"Loaded {mesh.vertices.n} vertices, {0 if mesh.faces is None else len(mesh.faces)} faces",
            extra={"path": str(path)},
        )
        return mesh

    def read_npy(self, name: PathLike) -> np.ndarray:
        path = self.resolve(name)
        return parse_npy(self.read_bytes(path), str(path))

    def save_npy(self, name: PathLike, array) -> Path:
        return self.write_bytes(name, encode_npy(array))

    def load_labels(self, name: PathLike) -> np.ndarray:
        """One integer label per line."""
        path = self.resolve(name)
        labels = []
        for number, tokens in _content_lines(self.read_text(path)):
            try:
                labels.append(int(tokens[0]))
            except ValueError as exc:
                raise ParseError(f"bad label {tokens[0]!r}", path=str(path), line=number) from exc
        return np.array(labels, dtype=np.int64)

    def save_labels(self, name: PathLike, labels) -> Path:
        return self.write_text(name, "".join(f"{int(v)}\n" for v in np.asarray(labels).reshape(-1)))

    @staticmethod
    def labels_path(points_path: Path) -> Path:
        return points_path.with_name(points_path.stem + LABELS_SUFFIX)

    def load_labeled_cloud(self, name: PathLike, labels: Optional[PathLike] = None) -> LabeledCloud:
        """Points from an npy file plus the sidecar labels (``<stem>.labels.txt`` by default)."""
        path = self.resolve(name)
        points = self.read_npy(path)
        label_path = self.resolve(labels) if labels is not None else self.labels_path(path)
        return LabeledCloud(PointCloud(points), self.load_labels(label_path))

    def save_labeled_cloud(self, name: PathLike, cloud: LabeledCloud) -> Path:
        path = self.save_npy(name, cloud.cloud.points)
        self.save_labels(self.labels_path(path), cloud.labels)
        return path


def load_mesh(path: PathLike, fmt: Optional[MeshFormat] = None) -> Mesh:
    """Module-level shortcut for MeshRepository().load_mesh."""
    return MeshRepository().load_mesh(path, fmt)


def save_npy(path: PathLike, array) -> Path:
    return MeshRepository().save_npy(path, array)
