"""Face identification from Hu-moment shape signatures of facial regions.

Pipeline: Haar-cascade face detection on grayscale frames, Otsu
binarization of the face crop, connected-component extraction of the two
eyebrows, two eyes and lip, seven moment invariants per region
(log-scaled), and nearest-subject matching against a line-oriented
gallery file.
"""

from .cascade import (
    CascadeFormatError,
    CascadeModel,
    Detection,
    detect_multiscale,
    eval_window,
    group_detections,
    parse_cascade,
    scan_windows,
)
from .gallery import (
    DuplicateSubjectError,
    EmptySignatureError,
    Gallery,
    GalleryFormatError,
    enroll,
    load_gallery,
    new_gallery,
    save_gallery,
)
from .image import BinaryImage, GrayImage, PgmFormatError, Rect, crop, load_pgm, save_pgm
from .integral import IntegralImage, build_integral, rect_sum, window_mean_stddev
from .matching import (
    FaceSignature,
    MatchResult,
    RegionFeature,
    Verdict,
    build_signature,
    identify,
    region_distance,
    signature_distance,
)
from .moments import (
    HuVector,
    central_moments,
    hu_from_coords,
    hu_vector,
    log_scale,
    normalized_moments,
    raw_moments,
)
from .pipeline import PipelineConfig, run_bench, run_identify, segment_face
from .segmentation import (
    Component,
    FaceRegions,
    RegionBands,
    RegionLabel,
    assign_regions,
    binarize,
    connected_components,
    histogram256,
    otsu_threshold,
)

__version__ = "0.1.0"
