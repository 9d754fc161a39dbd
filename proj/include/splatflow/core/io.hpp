#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "splatflow/core/gaussian.hpp"

namespace splatflow {

/// Scene file layout (all little-endian):
///   "FLWR1"            5-byte magic
///   uint32 sh_degree
///   uint64 primitive count
///   float64 scene_scale
///   per primitive, float32: position[3], log_scale[3], quat (w,x,y,z)[4],
///   opacity_logit, sh[(degree+1)^2 * 3] ([coeff][channel])
void save_scene(const GaussianScene& scene, const std::filesystem::path& path);
GaussianScene load_scene(const std::filesystem::path& path);

/// Binary 8-bit PPM (P6). Values are clamped to [0,1] and rounded.
void write_ppm(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_ppm(const std::filesystem::path& path);

/// Single-channel little-endian PFM ("Pf"), rows stored top to bottom.
void write_pfm(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_pfm(const std::filesystem::path& path);

struct CameraRecord {
  CameraView view;  // image left empty
  std::string image_path;
};

/// One camera per line:
///   id r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz fx fy cx cy image_path
/// Lines starting with '#' are ignored. Doubles are written with 17 significant
/// digits. Image paths are relative to the list file's directory.
void write_camera_list(const std::vector<CameraRecord>& cams, const std::filesystem::path& path);
std::vector<CameraRecord> read_camera_list(const std::filesystem::path& path);

/// Reads a camera list and loads every referenced PPM; width/height come from the images.
std::vector<CameraView> load_views(const std::filesystem::path& camera_list);

/// Writes each view's image as <dir>/<prefix><id>.ppm plus the camera list.
void save_views(const std::vector<CameraView>& views, const std::filesystem::path& dir,
                const std::string& list_name = "cameras.txt", const std::string& prefix = "view_");

}  // namespace splatflow
