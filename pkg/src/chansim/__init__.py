"""Link-level TDL/CDL wireless channel simulation with linear-optimal baselines."""

__version__ = "0.1.0"

from .baselines import (  # noqa: E402
    CovarianceModel,
    GaussianGenerator,
    LmmseEstimator,
    PcaCodec,
    analytic_mmse,
    gaussian_generate,
    lmmse_estimate,
    lmmse_fit,
    nmse,
    normalize_dataset,
    pca_expected_nmse,
    pca_fit,
    pca_roundtrip,
    sample_mean_cov,
    snr_to_noise_var,
)
from .cdl import (  # noqa: E402
    ArrayConfig,
    CdlLink,
    RayAngleSet,
    draw_ray_angles,
    generate_cdl_dataset,
    mc_cdl_covariance,
    steering_vector,
    ula_config,
)
from .chds import read_chds, write_chds  # noqa: E402
from .dataset import ChannelDataset  # noqa: E402
from .diagnostics import (  # noqa: E402
    GaussianityReport,
    Pmf,
    dft_codebook,
    empirical_cdf,
    fingerprint_pmf,
    gaussianity_report,
    ks_distance,
    spectral_efficiency,
    total_variation,
)
from .profiles import (  # noqa: E402
    CdlCluster,
    CdlProfile,
    LinkProfile,
    TapEntry,
    get_profile,
    list_profiles,
    load_profile,
    scale_delays,
)
from .stochastics import (  # noqa: E402
    RngStream,
    bessel_j0,
    jakes_covariance,
    psd_factorize,
    sample_complex_gaussian,
)
from .tdl import GridConfig, analytic_tdl_covariance, frequency_steering, generate_tdl_dataset  # noqa: E402
