"""Wavelet-domain image codec: lifting DWT, inference-only neural codec
pieces (wavelet-enhanced conv layers, channel-sliced conditional entropy
model), a self-contained classical wavelet codec, and R-D evaluation tools.
"""

from .errors import (
    BadMagic,
    BadShape,
    CodecError,
    CorruptBlob,
    DecodingError,
    DegenerateInput,
    EncodingError,
    IoError,
    MissingTensor,
    ModelMismatch,
    NumericalError,
    PreconditionViolation,
    ShapeMismatch,
    VersionUnsupported,
)
from .wavelets import (
    ExtensionMode,
    SubbandSet,
    WaveletKind,
    dwt1d,
    dwt2d,
    idwt1d,
    idwt2d,
    symmetric_extend,
)
from .nnops import (
    ConvParams,
    GdnParams,
    ResidualBlockParams,
    conv2d,
    gdn,
    gdn_inverse_exact,
    leaky_relu,
    residual_block,
)
from .manifest import ModelManifest, load_manifest, save_manifest
from .gaussian import (
    SIGMA_MIN,
    SYMBOL_MAX,
    SYMBOL_MIN,
    SymbolPlane,
    dequantize,
    estimate_rate,
    gaussian_symbol_prob,
    normal_cdf,
    quantize,
)
from .cdftable import CdfTable, build_factorized_cdf
from .rangecoder import (
    GaussianCdfs,
    TableCdfs,
    build_gaussian_row,
    exact_bits,
    range_decode,
    range_encode,
)
from .graph import (
    CodecGraph,
    LatentPair,
    SideInfo,
    WeConvParams,
    iweconv_forward,
    make_random_manifest,
    pack_hf,
    unpack_hf,
    validate_codec_manifest,
    weconv_forward,
)
from .charm import (
    SliceContext,
    classical_decode,
    classical_encode,
    decode_hf,
    decode_lf,
    encode_hf,
    encode_lf,
    merge_slices,
    predict_slice_params,
    sparsity_fractions,
    split_slices,
)
from .container import (
    RateReport,
    decode_array,
    decode_file,
    encode_array,
    encode_file,
    load_image,
    save_image,
)
from .metrics import ms_ssim, psnr
from .bdrate import RdPoint, bd_rate
from .synthimg import natural_image, write_corpus
from .sweep import SweepConfig, rd_sweep

__version__ = "0.1.0"
