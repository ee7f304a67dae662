import glob
import logging
import os
import uuid

import numpy as np

from src.models.errors import CloudFormatError, InvalidTransformError
from src.models.models import SO3_TOLERANCE, PairRecord, PointCloud, RigidTransform

logger = logging.getLogger(__name__)

KITTI_RECORD_BYTES = 16
POSE_WARN_TOLERANCE = 1e-6
POSE_REJECT_TOLERANCE = 1e-3
PLY_FORMAT = "{:.17g}"
PAIR_SUFFIXES = ("_src.ply", "_dst.ply", "_gt.txt")


def atomic_write(path, data):
    """Write bytes or text to a temporary sibling, then rename over path."""
    directory = os.path.dirname(os.path.abspath(path))
    tmp_path = os.path.join(directory, f".{os.path.basename(path)}.{uuid.uuid4().hex[:8]}.tmp")
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    try:
        with open(tmp_path, mode) as f:
            f.write(data)
        os.replace(tmp_path, path)
    except Exception as e:
        logger.error(f"Error writing {path}: {str(e)}")
        if os.path.exists(tmp_path):
            try:
                os.remove(tmp_path)
            except OSError as oe:
                logger.error(f"Error removing partial file {tmp_path}: {str(oe)}")
        raise
    return path


# --- KITTI velodyne scans ---

def load_kitti_bin(path):
    """Parse 16-byte little-endian float32 (x, y, z, intensity) records."""
    size = os.path.getsize(path)
    if size % KITTI_RECORD_BYTES != 0:
        raise CloudFormatError(
            f"Truncated KITTI scan: {size} bytes is not a multiple of {KITTI_RECORD_BYTES}",
            path=path,
            offset=(size // KITTI_RECORD_BYTES) * KITTI_RECORD_BYTES,
        )
    records = np.fromfile(path, dtype="<f4").reshape(-1, 4).astype(np.float64)
    return PointCloud(records[:, :3], records[:, 3])


def encode_kitti_bin(cloud):
    intensity = cloud.intensity if cloud.intensity is not None else np.zeros(len(cloud))
    records = np.column_stack([cloud.points, intensity]).astype("<f4")
    return records.tobytes()


def save_kitti_bin(cloud, path):
    return atomic_write(path, encode_kitti_bin(cloud))


# --- ASCII PLY ---

def load_ply(path):
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        text = raw.decode("latin-1")
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudFormatError("Missing 'ply' magic line", path=path)

    vertex_count = None
    properties = []
    in_vertex = False
    header_end = None
    for index, line in enumerate(lines[1:], start=1):
        tokens = line.split()
        if not tokens or tokens[0] == "comment" or tokens[0] == "obj_info":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise CloudFormatError(f"Unsupported format: {' '.join(tokens[1:2]) or 'unknown'}", path=path)
        elif tokens[0] == "element":
            in_vertex = len(tokens) == 3 and tokens[1] == "vertex"
            if in_vertex:
                vertex_count = int(tokens[2])
        elif tokens[0] == "property" and in_vertex:
            if tokens[1] == "list":
                raise CloudFormatError("List properties on vertices are not supported", path=path)
            properties.append(tokens[-1])
        elif tokens[0] == "end_header":
            header_end = index
            break
    if header_end is None:
        raise CloudFormatError("Missing field 'end_header'", path=path)
    if vertex_count is None:
        raise CloudFormatError("Missing field 'element vertex'", path=path)
    for name in ("x", "y", "z"):
        if name not in properties:
            raise CloudFormatError(f"Missing field '{name}' in vertex properties", path=path)

    body = lines[header_end + 1:header_end + 1 + vertex_count]
    if len(body) < vertex_count:
        raise CloudFormatError(f"Expected {vertex_count} vertices, found {len(body)}", path=path)
    columns = [properties.index(name) for name in ("x", "y", "z")]
    intensity_column = properties.index("intensity") if "intensity" in properties else None
    points = np.empty((vertex_count, 3))
    intensity = np.empty(vertex_count) if intensity_column is not None else None
    for row, line in enumerate(body):
        tokens = line.split()
        if len(tokens) < len(properties):
            raise CloudFormatError(f"Vertex {row} has {len(tokens)} values, expected {len(properties)}", path=path)
        try:
            points[row] = [float(tokens[c]) for c in columns]
            if intensity_column is not None:
                intensity[row] = float(tokens[intensity_column])
        except ValueError:
            raise CloudFormatError(f"Vertex {row} holds a non-numeric value", path=path) from None
    return PointCloud(points, intensity)


def encode_ply(cloud):
    has_intensity = cloud.intensity is not None
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
              "property double x", "property double y", "property double z"]
    if has_intensity:
        header.append("property double intensity")
    header.append("end_header")
    rows = []
    for i, point in enumerate(cloud.points):
        values = list(point) + ([cloud.intensity[i]] if has_intensity else [])
        rows.append(" ".join(PLY_FORMAT.format(v) for v in values))
    return "\n".join(header + rows) + "\n"


def save_ply(cloud, path):
    return atomic_write(path, encode_ply(cloud))


def load_cloud(path):
    """Dispatch on extension: .bin (KITTI) or .ply."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".bin":
        return load_kitti_bin(path)
    if ext == ".ply":
        return load_ply(path)
    raise CloudFormatError(f"Unsupported point-cloud extension '{ext}'", path=path)


def save_cloud(cloud, path):
    ext = os.path.splitext(path)[1].lower()
    if ext == ".bin":
        return save_kitti_bin(cloud, path)
    if ext == ".ply":
        return save_ply(cloud, path)
    raise CloudFormatError(f"Unsupported point-cloud extension '{ext}'", path=path)


# --- Poses ---

def nearest_rotation(matrix):
    u, _, vt = np.linalg.svd(matrix)
    correction = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vt))])
    return u @ correction @ vt


def pose_from_row(values, source="pose", line_number=None):
    matrix = np.asarray(values, dtype=np.float64).reshape(3, 4)
    rotation = matrix[:, :3]
    deviation = np.linalg.norm(rotation.T @ rotation - np.eye(3))
    if deviation > POSE_REJECT_TOLERANCE or np.linalg.det(rotation) <= 0:
        raise InvalidTransformError(
            f"{source} line {line_number}: rotation is not orthonormal (|R^T R - I| = {deviation:.3e})"
        )
    if deviation > POSE_WARN_TOLERANCE:
        logger.warning(f"{source} line {line_number}: re-orthonormalising rotation (|R^T R - I| = {deviation:.3e})")
    if deviation > SO3_TOLERANCE or abs(np.linalg.det(rotation) - 1.0) > SO3_TOLERANCE:
        rotation = nearest_rotation(rotation)
    return RigidTransform(rotation, matrix[:, 3])


def parse_pose_file(path):
    """One row-major 3x4 [R|t] per non-empty line."""
    poses = []
    with open(path) as f:
        for line_number, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 12:
                raise CloudFormatError(f"Line {line_number} holds {len(tokens)} numbers, expected 12", path=path)
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise CloudFormatError(f"Line {line_number} holds a non-numeric value", path=path) from None
            poses.append(pose_from_row(values, source=path, line_number=line_number))
    return poses


def relative_transforms(poses):
    """T_rel_i = T_i^-1 o T_{i+1}: maps frame i+1 coordinates into frame i."""
    return [poses[i].inverse().compose(poses[i + 1]) for i in range(len(poses) - 1)]


def format_transform(transform):
    return " ".join(PLY_FORMAT.format(v) for v in transform.as_matrix().reshape(-1))


def save_pose_file(transforms, path):
    return atomic_write(path, "".join(format_transform(t) + "\n" for t in transforms))


# --- Dataset layout: <id>_src.ply, <id>_dst.ply, <id>_gt.txt ---

def pair_paths(directory, pair_id):
    return tuple(os.path.join(directory, f"{pair_id}{suffix}") for suffix in PAIR_SUFFIXES)


def save_pair(record, directory):
    src_path, dst_path, gt_path = pair_paths(directory, record.id)
    save_ply(record.source, src_path)
    save_ply(record.target, dst_path)
    save_pose_file([record.ground_truth], gt_path)
    return record.id


def load_pair(directory, pair_id):
    src_path, dst_path, gt_path = pair_paths(directory, pair_id)
    for path in (src_path, dst_path, gt_path):
        if not os.path.exists(path):
            raise CloudFormatError(f"Missing dataset file for pair {pair_id}", path=path)
    poses = parse_pose_file(gt_path)
    if len(poses) != 1:
        raise CloudFormatError(f"Ground-truth file must hold one pose, found {len(poses)}", path=gt_path)
    return PairRecord(load_ply(src_path), load_ply(dst_path), poses[0], pair_id)


def list_pair_ids(directory):
    if not os.path.isdir(directory):
        raise CloudFormatError("Dataset directory not found", path=directory)
    suffix = "_src.ply"
    return sorted(os.path.basename(p)[:-len(suffix)] for p in glob.glob(os.path.join(directory, f"*{suffix}")))


def clear_dataset(directory):
    """Delete every pair file of the dataset layout; other files are left alone."""
    removed = 0
    for suffix in PAIR_SUFFIXES:
        for path in glob.glob(os.path.join(directory, f"*{suffix}")):
            os.remove(path)
            removed += 1
    logger.info(f"Removed {removed} dataset files from {directory}")
    return removed


def load_dataset(directory):
    ids = list_pair_ids(directory)
    if not ids:
        raise CloudFormatError("Dataset directory holds no '<id>_src.ply' files", path=directory)
    records = [load_pair(directory, pair_id) for pair_id in ids]
    logger.info(f"Loaded {len(records)} pairs from {directory}")
    return records


def load_kitti_sequence(velodyne_dir, poses_path, stride=1):
    """Consecutive-scan pairs: source is scan i+stride, target scan i, ground truth T_i^-1 o T_{i+stride}."""
    scans = sorted(glob.glob(os.path.join(velodyne_dir, "*.bin")))
    poses = parse_pose_file(poses_path)
    if len(scans) != len(poses):
        raise CloudFormatError(f"{len(scans)} scans but {len(poses)} poses", path=poses_path)
    records = []
    for i in range(0, len(scans) - stride, stride):
        relative = poses[i].inverse().compose(poses[i + stride])
        pair_id = f"{os.path.splitext(os.path.basename(scans[i]))[0]}_{stride}"
        records.append(PairRecord(load_kitti_bin(scans[i + stride]), load_kitti_bin(scans[i]), relative, pair_id))
    return records
