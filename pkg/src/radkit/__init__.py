"""radkit: FMCW radar perception toolkit.

Scene synthesis with analytically known spectra, the ADC -> RAD FFT chain,
CFAR detection, instance-wise auto-annotation, anchor fitting, detection
head decoding, training-loss references and AP evaluation, plus a small
HTTP service for reviewing and correcting annotations.
"""

from .anchors import AnchorSet, assign_anchor, fit_anchors
from .annotate import (DbscanConfig, Instance, ProjectionMatrix,
                       connect_patterns, dbscan, extract_instances,
                       fit_projection, instance_to_boxes, transfer_labels)
from .cfar import CfarConfig, ca_alpha, cfar_2d
from .config import ProjectConfig, load_config
from .detect import (Detection, decode2d, decode3d, encode2d, encode3d,
                     postprocess)
from .dsp import (compute_stats, log_magnitude, normalize, ra_map,
                  rad_from_adc, rd_map)
from .evaluation import (EvalReport, IOU_THRESHOLDS, average_precision,
                       evaluate, match, split_dataset)
from .geometry import (Box2D, Box3D, CartesianGrid, RANGE_BIN_METERS,
                       box3d_contains, iou2d, iou3d, nms, polar_to_cart,
                       resample_ra_to_cart)
from .losses import (LossBreakdown, box_loss, class_loss,
                     focal_objectness_loss, head_loss, head_loss_grad,
                     total_loss)
from .synth import PointTarget, Scene, expected_bins, synth_adc
from .tensorio import (AdcCube, AnnotationRecord, NormalizationStats,
                       RadCube, TensorContainer, read_annotations,
                       read_tensor, write_annotations, write_tensor)

__version__ = "0.1.0"
