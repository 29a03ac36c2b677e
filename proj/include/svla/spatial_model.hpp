#pragma once

#include <optional>

#include "svla/autodiff.hpp"
#include "svla/config.hpp"
#include "svla/nn.hpp"
#include "svla/param_store.hpp"
#include "svla/types.hpp"

namespace svla {

// Spatial encoder: tokenizes the side view, optionally injects depth tokens
// and a ground-truth camera token behind per-sample Bernoulli gates, runs
// cross/self-attention blocks, and regresses depth / pointmap / camera pose
// for auxiliary supervision. All parameters live under the "spatial." prefix.

// --- pure patch helpers (no gradients flow through pixels) -----------------

// rows = patches in row-major patch order, cols = patch_size² pixel values
MatrixXd patchify_plane(const MatrixXd& plane, int patch);
// image planes concatenated along columns: M × (patch²·channels)
MatrixXd patchify_image(const Image& img, int patch);
// inverse of patchify_plane
MatrixXd untile_plane(const MatrixXd& rows, int patch, int h, int w);

void init_esm(ParameterStore& s, const Config& c, Rng& rng);

// --- operations ------------------------------------------------------------

// linear patch embedding plus positional embedding → M×D_s
Var tokenize_image(Graph& g, const ParameterStore& s, const Config& c,
                   const Image& img);

// depth / Norm(depth) over valid pixels, invalid pixels zeroed; Norm is the
// median of the valid depths. Throws std::invalid_argument when the mask is
// empty or valid depths are negative.
MatrixXd normalize_depth(const MatrixXd& depth, const MaskMatrix& valid);

// patch-kernel convolution stack over [normalized depth ‖ validity mask]
Var encode_depth(Graph& g, const ParameterStore& s, const Config& c,
                 const MatrixXd& normalized_depth, const MaskMatrix& valid);

// 11-vector (translation / scene bound, quaternion, intrinsics / image size)
// through a 2-layer perceptron → 1×D_s ground-truth camera token
Var encode_camera(Graph& g, const ParameterStore& s, const Config& c,
                  const CameraParams& cam);

struct EsmEncoding {
  Var spatial_tokens;   // M×D_s
  Var camera_token;     // 1×D_s, refined camera slot
};

// Gated conditioning + encoder. With b_d=0 / b_p=0 the corresponding
// optional is never read, so the gated-off path is bitwise identical to
// passing std::nullopt. Throws when a gate is set without its condition.
EsmEncoding condition_and_encode(Graph& g, const ParameterStore& s,
                                 const Config& c, Var visual,
                                 const std::optional<Var>& depth_tokens,
                                 const std::optional<Var>& gt_camera,
                                 int b_d, int b_p);

struct ReconVars {
  Var depth_rows;      // M × patch² (patch-major, untile for the image view)
  Var pointmap_rows;   // M × 3·patch², channels x,y,z side by side
  Var pose;            // 1×7, quaternion part renormalized (zero → identity)
};

ReconVars reconstruct(Graph& g, const ParameterStore& s, const Config& c,
                      const EsmEncoding& enc);

// numeric view of the reconstruction for metrics / reporting
struct ReconOutput {
  MatrixXd depth;                  // H×W
  std::vector<MatrixXd> pointmap;  // 3 planes H×W
  Eigen::Matrix<double, 7, 1> pose;
};
ReconOutput recon_to_output(const ReconVars& r, const Config& c);

struct ReconLossVars {
  Var total;
  Var depth_l1;      // mean |Δdepth| over valid pixels
  Var pointmap_l1;   // mean per-pixel 1-norm of Δxyz over valid pixels
  Var pose_err;      // ‖Δtranslation‖² + (1 − |⟨q, q̂⟩|)
  bool empty_mask_warning = false;
};

// Ground truths arrive patchified with the same layout as ReconVars.
// Components are equally weighted; an empty mask zeroes the depth and
// pointmap components and raises the warning flag.
ReconLossVars recon_loss(Graph& g, const ReconVars& pred,
                         const MatrixXd& gt_depth_rows,
                         const MatrixXd& gt_mask_rows,
                         const MatrixXd& gt_pointmap_rows,
                         const Eigen::Matrix<double, 7, 1>& gt_pose);

// convenience: full conditioned forward from an observation that carries
// depth and camera; gates select what is actually injected
EsmEncoding esm_forward(Graph& g, const ParameterStore& s, const Config& c,
                        const Observation& obs, int b_d, int b_p);

}  // namespace svla
