"""
flowdeblur - spatially-varying motion deblurring by half-quadratic splitting.

pip install flowdeblur → ``flowdeblur generate/blur/deblur/eval`` + library API

- Imaging: Image, MotionFlowMap, PNG and MFLO file I/O, PSNR/SSIM/flow MSE
- Blur: per-pixel linear-motion stamps, sparse forward/adjoint operator
- Solver: CG x-step, HQS levels, global iteration with pluggable priors
- Priors: identity, total variation, external process (DNZ frames on stdio)
- Data: synthetic flows, blurred pairs, TSV-manifest datasets
- Losses: GAN objective terms and the multi-level buffer policy
"""

__version__ = "0.1.0"

from .blur import (  # noqa: E402
    BlurOperator,
    BoundaryPolicy,
    KernelStamp,
    Tap,
    adjoint_blur,
    forward_blur,
    kernel_from_motion,
    normal_apply,
)
from .errors import (  # noqa: E402
    ConfigError,
    DatasetError,
    ExternalProcessError,
    FlowDeblurError,
    FlowFormatError,
    FlowProviderError,
    ImageIOError,
    MalformedReplyError,
    NumericalError,
    ParameterError,
    ProcessTimeoutError,
    ReplyShapeError,
    ShapeError,
    SpawnError,
)
from .external import ExternalDenoiser, ExternalDenoiserConfig, external_denoise  # noqa: E402
from .fileio import read_flow, read_image, write_flow, write_image  # noqa: E402
from .imaging import Image, MetricReport, MotionFlowMap  # noqa: E402
from .losses import (  # noqa: E402
    BufferPolicy,
    LossWeights,
    artifacts_penalty,
    buffer_counts,
    buffer_sample,
    cgan_generator_loss,
    cgan_objective,
    content_loss,
    total_loss,
    wasserstein_estimate,
)
from .metrics import evaluate, flow_mse, psnr, ssim  # noqa: E402
from .priors import IdentityPrior, TvParams, TvPrior, identity_denoise, tv_denoise  # noqa: E402
from .providers import CommandFlowProvider, OracleFlowProvider, StaticFlowProvider  # noqa: E402
from .solver import (  # noqa: E402
    DenoiserPrior,
    HqsSchedule,
    SolveTrace,
    cg_solve,
    global_iterate,
    hqs_deblur,
    x_step,
)
from .synth import FlowGenParams, build_dataset, generate_pair, sample_flow  # noqa: E402

__all__ = [
    "__version__",
    "Image",
    "MotionFlowMap",
    "MetricReport",
    "read_image",
    "write_image",
    "read_flow",
    "write_flow",
    "psnr",
    "ssim",
    "flow_mse",
    "evaluate",
    "BlurOperator",
    "BoundaryPolicy",
    "KernelStamp",
    "Tap",
    "kernel_from_motion",
    "forward_blur",
    "adjoint_blur",
    "normal_apply",
    "HqsSchedule",
    "DenoiserPrior",
    "SolveTrace",
    "cg_solve",
    "x_step",
    "hqs_deblur",
    "global_iterate",
    "IdentityPrior",
    "TvPrior",
    "TvParams",
    "identity_denoise",
    "tv_denoise",
    "ExternalDenoiser",
    "ExternalDenoiserConfig",
    "external_denoise",
    "OracleFlowProvider",
    "StaticFlowProvider",
    "CommandFlowProvider",
    "FlowGenParams",
    "sample_flow",
    "generate_pair",
    "build_dataset",
    "LossWeights",
    "BufferPolicy",
    "artifacts_penalty",
    "wasserstein_estimate",
    "cgan_generator_loss",
    "cgan_objective",
    "content_loss",
    "total_loss",
    "buffer_counts",
    "buffer_sample",
    "FlowDeblurError",
    "ShapeError",
    "ParameterError",
    "ConfigError",
    "ImageIOError",
    "FlowFormatError",
    "DatasetError",
    "NumericalError",
    "ExternalProcessError",
    "SpawnError",
    "ProcessTimeoutError",
    "MalformedReplyError",
    "ReplyShapeError",
    "FlowProviderError",
]
