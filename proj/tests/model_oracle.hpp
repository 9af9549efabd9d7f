#pragma once

// Reference evaluator for the makespan model, written as a direct
// transcription of the formulas with their original symbols so it can be
// checked by eye. It deliberately shares no code with sea::model beyond the
// input structs.

#include <algorithm>

#include "sea/perfmodel.hpp"

namespace sea::oracle {

struct Symbols {
  double c, s, p, d, g, N, d_r, d_w, G_r, G_w, C_r, C_w, t, r, F;
  double D_I, D_m, D_f, D_r, D_w, D_cr, D_cw;
};

inline Symbols symbols(const model::WorkloadSpec& w, const model::ClusterSpec& k) {
  return Symbols{double(k.nodes), double(k.storage_nodes), double(k.processes),
                 double(k.storage_disks), double(k.local_disks), k.network_bw,
                 k.pfs_disk_read_bw, k.pfs_disk_write_bw, k.local_disk_read_bw,
                 k.local_disk_write_bw, k.cache_read_bw, k.cache_write_bw,
                 k.tmpfs_space, k.local_disk_space, k.file_size, w.input,
                 w.intermediate, w.final_output, w.read, w.written, w.cache_read,
                 w.cache_written};
}

inline double L_r(const Symbols& x) {
  return std::min({x.c * x.N, x.s * x.N, x.d_r * std::min(x.d, x.c * x.p)});
}
inline double L_w(const Symbols& x) {
  return std::min({x.c * x.N, x.s * x.N, x.d_w * std::min(x.d, x.c * x.p)});
}

// M_l = D_r / L_r + D_w / L_w
inline double M_l(const Symbols& x) { return x.D_r / L_r(x) + x.D_w / L_w(x); }

// M_c = D_cr / (c C_r) + D_cw / (c C_w)
inline double M_c(const Symbols& x) {
  return x.D_cr / (x.c * x.C_r) + x.D_cw / (x.c * x.C_w);
}

// M_lc = D_I / L_r + M_c with all post-input traffic in cache.
inline double M_lc(Symbols x) {
  x.D_cr = x.D_m;
  x.D_cw = x.D_m + x.D_f;
  return x.D_I / L_r(x) + M_c(x);
}

struct Volumes {
  double D_tr, D_tw, D_gr, D_gw, D_Lr, D_Lw;
};

inline Volumes volumes(const Symbols& x) {
  Volumes v{};
  v.D_tr = std::min(x.D_m, std::max(x.c * (x.t - x.p * x.F), 0.0));
  v.D_tw = std::min(x.D_m + x.D_f, std::max(x.c * (x.t - x.p * x.F), 0.0));
  v.D_gr = std::min(x.D_m - v.D_tr, std::max(x.c * (x.g * x.r - x.p * x.F), 0.0));
  v.D_gw = std::min(x.D_m + x.D_f - v.D_tw,
                    std::max(x.c * (x.g * x.r - x.p * x.F), 0.0));
  v.D_Lr = x.D_m - v.D_gr - v.D_tr;
  v.D_Lw = x.D_m + x.D_f - v.D_gw - v.D_tw;
  return v;
}

// M_S = M_SL + M_Sg + M_St
inline double M_S(const Symbols& x) {
  auto v = volumes(x);
  double M_St = v.D_tr / (x.c * x.C_r) + v.D_tw / (x.c * x.C_w);
  double M_Sg = 0;
  if (x.g > 0) M_Sg = v.D_gr / (x.g * x.c * x.G_r) + v.D_gw / (x.g * x.c * x.G_w);
  double M_SL = x.D_I / L_r(x) + v.D_Lr / L_r(x) + v.D_Lw / L_w(x);
  return M_SL + M_Sg + M_St;
}

// M_Sc = D_I / L_r + D_m / (c C_r) + (D_m + D_f) / (c C_w)
inline double M_Sc(const Symbols& x) {
  return x.D_I / L_r(x) + x.D_m / (x.c * x.C_r) + (x.D_m + x.D_f) / (x.c * x.C_w);
}

}  // namespace sea::oracle
