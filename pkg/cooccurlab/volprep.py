import math
import logging
import numpy
from scipy import ndimage
from .errors import VolumeFormatError

logger = logging.getLogger(__name__)

MAGIC = b'RVL1'
HEADER_SIZE = 28 # magic + 3 x u32 dims + 3 x f32 spacing
TARGET_SPACING = (2.0, 2.0, 2.0)
HU_RANGE = (-1000.0, 800.0)
_MIN_STD = 1e-8


class Volume(object):
    '''CT volume on a regular grid.

    Parameters:
    voxels: float (nz, ny, nx) - intensities; C order makes x the fastest axis.
    spacing: (sx, sy, sz) - voxel size in mm.'''
    def __init__(self, voxels, spacing):
        voxels = numpy.array(voxels, dtype=numpy.float64)
        if voxels.ndim != 3 or min(voxels.shape) < 1:
            raise ValueError('voxels must be a non-empty 3D array, got shape {}.'.format(voxels.shape))
        if not numpy.isfinite(voxels).all():
            raise ValueError('voxels must be finite.')
        spacing = tuple(float(s) for s in spacing)
        if len(spacing) != 3 or not all(math.isfinite(s) and s > 0 for s in spacing):
            raise ValueError('spacing must be three positive numbers, got {}.'.format(spacing))
        self.voxels = voxels
        self.spacing = spacing

    def __repr__(self):
        return 'Volume(dims={}, spacing={})'.format(self.dims, self.spacing)

    @property
    def dims(self):
        '''(nx, ny, nz)'''
        return tuple(int(n) for n in self.voxels.shape[::-1])


# ---- preprocessing ----
def resampled_dims(dims, spacing, target_spacing=TARGET_SPACING):
    '''Round-half-up of the physical extent in target voxels, at least 1.'''
    return tuple(max(1, int(math.floor(n * s / t + 0.5))) for n, s, t in zip(dims, spacing, target_spacing))

def resample(v, target_spacing=TARGET_SPACING):
    '''Resample to the target spacing by cubic B-spline interpolation.

    The spline coefficients are prefiltered and the volume is mirrored at
    its edges. Output voxel o along an axis samples input position o*t/s,
    so the first voxel centre stays in place.

    Parameters:
    v: Volume
    target_spacing: (tx, ty, tz) - output voxel size in mm.

    Returns:
    v: Volume - with spacing exactly target_spacing.'''
    target_spacing = tuple(float(t) for t in target_spacing)
    if len(target_spacing) != 3 or not all(t > 0 for t in target_spacing):
        raise ValueError('target spacing must be three positive numbers, got {}.'.format(target_spacing))
    dims = resampled_dims(v.dims, v.spacing, target_spacing)
    step = numpy.array([t / s for t, s in zip(target_spacing, v.spacing)])[::-1] # (z, y, x)
    voxels = ndimage.affine_transform(v.voxels, step, offset=0.0,
        output_shape=dims[::-1], order=3, mode='mirror', prefilter=True)
    logger.debug('resampled %s at %s mm to %s at %s mm', v.dims, v.spacing, dims, target_spacing)
    return Volume(voxels, target_spacing)

def clip_normalize(v, hu_range=HU_RANGE):
    '''Clip intensities to hu_range, then z-score with the clipped volume's
    mean and population standard deviation. A flat volume maps to zeros.'''
    x = numpy.clip(v.voxels, hu_range[0], hu_range[1])
    mean = x.mean()
    std = x.std()
    if std < _MIN_STD:
        return Volume(numpy.zeros_like(x), v.spacing)
    return Volume((x - mean) / std, v.spacing)

def preprocess(v, target_spacing=TARGET_SPACING, normalize=True):
    v = resample(v, target_spacing)
    return clip_normalize(v) if normalize else v

# ---- RVOL format ----
def write_rvol(v, path):
    '''Write a volume: b'RVL1', little-endian u32 nx ny nz, f32 sx sy sz,
    then f32 voxels in x-fastest order.'''
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(numpy.array(v.dims, dtype='<u4').tobytes())
        f.write(numpy.array(v.spacing, dtype='<f4').tobytes())
        f.write(numpy.ascontiguousarray(v.voxels, dtype='<f4').tobytes())

def read_rvol(path):
    with open(path, 'rb') as f:
        data = f.read()
    if len(data) < HEADER_SIZE or data[:4] != MAGIC:
        raise VolumeFormatError('{}: not an RVOL file.'.format(path))
    dims = tuple(int(n) for n in numpy.frombuffer(data, dtype='<u4', count=3, offset=4))
    spacing = tuple(float(s) for s in numpy.frombuffer(data, dtype='<f4', count=3, offset=16))
    count = dims[0] * dims[1] * dims[2]
    if count == 0:
        raise VolumeFormatError('{}: empty volume {}.'.format(path, dims))
    if len(data) != HEADER_SIZE + 4 * count:
        raise VolumeFormatError('{}: expected {} voxel bytes for dims {}, found {}.'.format(
            path, 4 * count, dims, len(data) - HEADER_SIZE))
    voxels = numpy.frombuffer(data, dtype='<f4', count=count, offset=HEADER_SIZE)
    try:
        return Volume(voxels.reshape(dims[::-1]), spacing)
    except ValueError as err:
        raise VolumeFormatError('{}: {}'.format(path, err))
