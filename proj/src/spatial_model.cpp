#include "svla/spatial_model.hpp"

#include <algorithm>
#include <stdexcept>

#include "svla/sim.hpp"

namespace svla {

MatrixXd patchify_plane(const MatrixXd& plane, int patch) {
  const int h = (int)plane.rows(), w = (int)plane.cols();
  if (h % patch != 0 || w % patch != 0) {
    throw std::invalid_argument("patch size must divide the image");
  }
  const int ph = h / patch, pw = w / patch;
  MatrixXd out(ph * pw, patch * patch);
  for (int pi = 0; pi < ph; ++pi) {
    for (int pj = 0; pj < pw; ++pj) {
      int col = 0;
      for (int i = 0; i < patch; ++i) {
        for (int j = 0; j < patch; ++j) {
          out(pi * pw + pj, col++) = plane(pi * patch + i, pj * patch + j);
        }
      }
    }
  }
  return out;
}

MatrixXd patchify_image(const Image& img, int patch) {
  if (img.channels() == 0) throw std::invalid_argument("empty image");
  std::vector<MatrixXd> per_plane;
  per_plane.reserve(img.channels());
  for (const auto& p : img.planes) per_plane.push_back(patchify_plane(p, patch));
  MatrixXd out(per_plane[0].rows(),
               per_plane[0].cols() * (long)img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    out.middleCols(c * per_plane[0].cols(), per_plane[0].cols()) = per_plane[c];
  }
  return out;
}

MatrixXd untile_plane(const MatrixXd& rows, int patch, int h, int w) {
  const int ph = h / patch, pw = w / patch;
  if (rows.rows() != ph * pw || rows.cols() != patch * patch) {
    throw std::invalid_argument("untile: row matrix does not match the grid");
  }
  MatrixXd out(h, w);
  for (int pi = 0; pi < ph; ++pi) {
    for (int pj = 0; pj < pw; ++pj) {
      int col = 0;
      for (int i = 0; i < patch; ++i) {
        for (int j = 0; j < patch; ++j) {
          out(pi * patch + i, pj * patch + j) = rows(pi * pw + pj, col++);
        }
      }
    }
  }
  return out;
}

void init_esm(ParameterStore& s, const Config& c, Rng& rng) {
  const int p2 = c.patch_size * c.patch_size;
  const int m = c.patch_count();
  const auto g = ParamGroup::spatial;
  init_linear(s, "spatial.tokenizer", p2 * c.image_channels, c.spatial_dim, rng, g);
  init_matrix(s, "spatial.pos", m, c.spatial_dim, 0.1, rng, g);
  // depth conditioning: patch-kernel conv over [depth ‖ mask], then 1×1 conv
  init_linear(s, "spatial.depth_conv1", 2 * p2, c.spatial_dim, rng, g);
  init_linear(s, "spatial.depth_conv2", c.spatial_dim, c.spatial_dim, rng, g);
  init_mlp2(s, "spatial.camenc", 11, c.spatial_ffn_hidden, c.spatial_dim, rng, g);
  init_matrix(s, "spatial.cam_token", 1, c.spatial_dim, 0.1, rng, g);
  for (int b = 0; b < c.spatial_blocks; ++b) {
    const std::string prefix = "spatial.blk" + std::to_string(b);
    init_layer_norm(s, prefix + ".ln_ca", c.spatial_dim, g);
    init_attention(s, prefix + ".cross", c.spatial_dim, rng, g);
    init_self_block(s, prefix + ".self", c.spatial_dim, c.spatial_ffn_hidden, rng, g);
  }
  init_linear(s, "spatial.depth_head", c.spatial_dim, p2, rng, g);
  init_linear(s, "spatial.pointmap_head", c.spatial_dim, 3 * p2, rng, g);
  init_mlp2(s, "spatial.pose_head", c.spatial_dim, c.spatial_ffn_hidden, 7, rng, g);
}

Var tokenize_image(Graph& g, const ParameterStore& s, const Config& c,
                   const Image& img) {
  if (img.height() != c.image_height || img.width() != c.image_width ||
      img.channels() != c.image_channels) {
    throw std::invalid_argument("tokenize_image: image shape mismatch");
  }
  Var patches = g.input(patchify_image(img, c.patch_size));
  Var tokens = linear(g, s, "spatial.tokenizer", patches);
  return add(tokens, g.param("spatial.pos", s.at("spatial.pos")));
}

MatrixXd normalize_depth(const MatrixXd& depth, const MaskMatrix& valid) {
  if (depth.rows() != valid.rows() || depth.cols() != valid.cols()) {
    throw std::invalid_argument("normalize_depth: shape mismatch");
  }
  std::vector<double> vals;
  vals.reserve((size_t)depth.size());
  for (int i = 0; i < depth.rows(); ++i) {
    for (int j = 0; j < depth.cols(); ++j) {
      if (valid(i, j) != 0.0) {
        if (depth(i, j) < 0.0) {
          throw std::invalid_argument("normalize_depth: negative valid depth");
        }
        vals.push_back(depth(i, j));
      }
    }
  }
  if (vals.empty()) {
    throw std::invalid_argument("normalize_depth: empty validity mask");
  }
  // Norm = median of the valid depths: positive-homogeneous and robust
  const size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  double norm = vals[mid];
  if (vals.size() % 2 == 0) {
    const double hi = norm;
    std::nth_element(vals.begin(), vals.begin() + mid - 1, vals.end());
    norm = 0.5 * (vals[mid - 1] + hi);
  }
  if (norm <= 0.0) {
    throw std::invalid_argument("normalize_depth: median depth is zero");
  }
  MatrixXd out = MatrixXd::Zero(depth.rows(), depth.cols());
  for (int i = 0; i < depth.rows(); ++i) {
    for (int j = 0; j < depth.cols(); ++j) {
      if (valid(i, j) != 0.0) out(i, j) = depth(i, j) / norm;
    }
  }
  return out;
}

Var encode_depth(Graph& g, const ParameterStore& s, const Config& c,
                 const MatrixXd& normalized_depth, const MaskMatrix& valid) {
  if (normalized_depth.rows() != c.image_height ||
      normalized_depth.cols() != c.image_width ||
      valid.rows() != c.image_height || valid.cols() != c.image_width) {
    throw std::invalid_argument("encode_depth: shape mismatch");
  }
  MatrixXd d_rows = patchify_plane(normalized_depth, c.patch_size);
  MatrixXd m_rows = patchify_plane(valid, c.patch_size);
  MatrixXd both(d_rows.rows(), d_rows.cols() * 2);
  both << d_rows, m_rows;
  Var h = tanh_act(linear(g, s, "spatial.depth_conv1", g.input(std::move(both))));
  return linear(g, s, "spatial.depth_conv2", h);
}

Var encode_camera(Graph& g, const ParameterStore& s, const Config& c,
                  const CameraParams& cam) {
  cam.validate();
  Eigen::Matrix<double, 1, 11> v;
  v << cam.translation.x() / kSceneBound, cam.translation.y() / kSceneBound,
      cam.translation.z() / kSceneBound, cam.quaternion[0], cam.quaternion[1],
      cam.quaternion[2], cam.quaternion[3], cam.fx / c.image_width,
      cam.fy / c.image_height, cam.cx / c.image_width, cam.cy / c.image_height;
  return mlp2(g, s, "spatial.camenc", g.input(v));
}

EsmEncoding condition_and_encode(Graph& g, const ParameterStore& s,
                                 const Config& c, Var visual,
                                 const std::optional<Var>& depth_tokens,
                                 const std::optional<Var>& gt_camera,
                                 int b_d, int b_p) {
  if (b_d != 0 && !depth_tokens.has_value()) {
    throw std::invalid_argument("depth gate set but no depth tokens supplied");
  }
  if (b_p != 0 && !gt_camera.has_value()) {
    throw std::invalid_argument("pose gate set but no camera token supplied");
  }
  // gated-off inputs are never touched, so the reduction to the
  // unconditioned path is bitwise exact
  Var tokens = b_d ? add(visual, *depth_tokens) : visual;
  Var cam_slot = b_p ? *gt_camera
                     : g.param("spatial.cam_token", s.at("spatial.cam_token"));

  Var x = concat_rows({cam_slot, tokens});
  for (int b = 0; b < c.spatial_blocks; ++b) {
    const std::string prefix = "spatial.blk" + std::to_string(b);
    // every token attends onto the camera slot, then full self-attention
    Var normed = layer_norm(g, s, prefix + ".ln_ca", x);
    Var cam_row = slice_rows(normed, 0, 1);
    x = add(x, attention(g, s, prefix + ".cross", normed, cam_row,
                         c.attention_heads));
    x = self_block(g, s, prefix + ".self", x, c.attention_heads);
  }
  EsmEncoding out;
  out.camera_token = slice_rows(x, 0, 1);
  out.spatial_tokens = slice_rows(x, 1, c.patch_count());
  return out;
}

ReconVars reconstruct(Graph& g, const ParameterStore& s, const Config& c,
                      const EsmEncoding& enc) {
  ReconVars r;
  r.depth_rows = linear(g, s, "spatial.depth_head", enc.spatial_tokens);
  r.pointmap_rows = linear(g, s, "spatial.pointmap_head", enc.spatial_tokens);
  Var pose_raw = mlp2(g, s, "spatial.pose_head", enc.camera_token);
  Var t = slice_cols(pose_raw, 0, 3);
  Var q = normalize_row(slice_cols(pose_raw, 3, 4));
  r.pose = concat_cols({t, q});
  return r;
}

ReconOutput recon_to_output(const ReconVars& r, const Config& c) {
  ReconOutput out;
  out.depth = untile_plane(r.depth_rows.value(), c.patch_size, c.image_height,
                           c.image_width);
  const int p2 = c.patch_size * c.patch_size;
  for (int ch = 0; ch < 3; ++ch) {
    out.pointmap.push_back(untile_plane(
        r.pointmap_rows.value().middleCols(ch * p2, p2), c.patch_size,
        c.image_height, c.image_width));
  }
  out.pose = r.pose.value().row(0).transpose();
  return out;
}

ReconLossVars recon_loss(Graph& g, const ReconVars& pred,
                         const MatrixXd& gt_depth_rows,
                         const MatrixXd& gt_mask_rows,
                         const MatrixXd& gt_pointmap_rows,
                         const Eigen::Matrix<double, 7, 1>& gt_pose) {
  ReconLossVars out;
  const double n_valid = gt_mask_rows.sum();
  const int p2 = (int)gt_depth_rows.cols();

  if (n_valid > 0.0) {
    Var mask = g.input(gt_mask_rows);
    Var d_err = abs_val(sub(pred.depth_rows, g.input(gt_depth_rows)));
    out.depth_l1 = scale(sum_all(mul(d_err, mask)), 1.0 / n_valid);

    MatrixXd mask3(gt_mask_rows.rows(), 3 * p2);
    mask3 << gt_mask_rows, gt_mask_rows, gt_mask_rows;
    Var p_err = abs_val(sub(pred.pointmap_rows, g.input(gt_pointmap_rows)));
    out.pointmap_l1 = scale(sum_all(mul(p_err, g.input(mask3))), 1.0 / n_valid);
  } else {
    out.empty_mask_warning = true;
    out.depth_l1 = g.input(MatrixXd::Zero(1, 1));
    out.pointmap_l1 = g.input(MatrixXd::Zero(1, 1));
  }

  Var gt = g.input(gt_pose.transpose());
  Var dt = sub(slice_cols(pred.pose, 0, 3), slice_cols(gt, 0, 3));
  Var trans_err = sum_all(mul(dt, dt));
  Var qdot = sum_all(mul(slice_cols(pred.pose, 3, 4), slice_cols(gt, 3, 4)));
  Var one = g.input(MatrixXd::Ones(1, 1));
  out.pose_err = add(trans_err, sub(one, abs_val(qdot)));

  out.total = add(add(out.depth_l1, out.pointmap_l1), out.pose_err);
  return out;
}

EsmEncoding esm_forward(Graph& g, const ParameterStore& s, const Config& c,
                        const Observation& obs, int b_d, int b_p) {
  Var visual = tokenize_image(g, s, c, obs.side_image);
  std::optional<Var> depth_tokens;
  std::optional<Var> cam_token;
  if (b_d) {
    if (!obs.depth || !obs.depth_valid) {
      throw std::invalid_argument("depth gate set but observation has no depth");
    }
    depth_tokens =
        encode_depth(g, s, c, normalize_depth(*obs.depth, *obs.depth_valid),
                     *obs.depth_valid);
  }
  if (b_p) {
    if (!obs.camera) {
      throw std::invalid_argument("pose gate set but observation has no camera");
    }
    cam_token = encode_camera(g, s, c, *obs.camera);
  }
  return condition_and_encode(g, s, c, visual, depth_tokens, cam_token, b_d, b_p);
}

}  // namespace svla
