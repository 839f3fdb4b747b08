"""Hole detection and non-local graph-regularized inpainting of voxelized point clouds."""
from .cloud import BoundingBox, PointCloud, SpatialIndex, estimate_normals, knn_query
from .config import PipelineConfig, load_config, parse_config
from .cubes import Cube, extract_cubes, filter_and_mirror_candidates, select_target_cubes
from .graph import (KnnGraph, Laplacian, SpectralDecomposition, build_knn_graph,
                    count_nodal_domains, gft, igft, isotropic_gtv, laplacian,
                    smoothness_energy, spectral_decompose, verify_nodal_bounds)
from .holes import DepthMap, HoleRegion, detect_holes, read_manifest, write_manifest
from .inpaint import HoleReport, inpaint_all, inpaint_hole
from .matching import SimilarityScore, agtv, best_source, direct_component, similarity
from .metrics import MetricReport, evaluate, gpsnr, nshd, ohd, point_to_plane_error
from .ply import load_ply, save_ply
from .registration import (RegistrationTransform, boundary_translation, register_source,
                           simplified_icp_rotation)
from .solver import InpaintProblem, solve_inpaint
from .synth import HoleSynthesisSpec, punch_hole
from .voxel import NormalizationRecord, VoxelGrid, normalize_coordinates, to_cloud, voxelize

__version__ = "0.1.0"
