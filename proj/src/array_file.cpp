#include "tdaug/io/array_file.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace tdaug {

namespace {
using json = nlohmann::json;

constexpr char kMagic[] = "TDARR1\n";

void write_header(std::ofstream& out, const json& header) {
  const std::string hs = header.dump();
  out.write(kMagic, sizeof(kMagic) - 1);
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
}

json read_header(std::ifstream& in, const std::string& path) {
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, sizeof(magic)) != std::string(kMagic, sizeof(magic)))
    throw std::runtime_error("not an array file: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("truncated array file header: " + path);
  return json::parse(hs);
}

}  // namespace

void save_image_array(const ImageVolume& vol, const std::string& path,
                      const std::string& meta_json) {
  vol.validate();
  json header;
  header["dtype"] = "float32";
  header["shape"] = {vol.depth(), vol.height(), vol.width()};
  header["spacing"] = {vol.spacing[0], vol.spacing[1], vol.spacing[2]};
  header["subject_id"] = vol.subject_id;
  header["phase_tag"] = vol.phase_tag;
  header["structure_names"] = vol.structure_names;
  header["meta"] = json::parse(meta_json.empty() ? "{}" : meta_json);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write array file: " + path);
  write_header(out, header);
  for (const auto& sl : vol.slices)
    for (Eigen::Index y = 0; y < sl.rows(); ++y)
      for (Eigen::Index x = 0; x < sl.cols(); ++x) {
        const float v = sl(y, x);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  if (!out) throw std::runtime_error("short write on array file: " + path);
}

ImageVolume load_image_array(const std::string& path, std::string* meta_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open array file: " + path);
  const json header = read_header(in, path);
  if (header.at("dtype") != "float32")
    throw std::runtime_error("array file is not a float image: " + path);
  const auto shape = header.at("shape");
  const int nz = shape[0], ny = shape[1], nx = shape[2];

  ImageVolume vol;
  const auto sp = header.at("spacing");
  vol.spacing = {sp[0].get<float>(), sp[1].get<float>(), sp[2].get<float>()};
  vol.subject_id = header.value("subject_id", "");
  vol.phase_tag = header.value("phase_tag", "");
  if (header.contains("structure_names"))
    vol.structure_names = header.at("structure_names").get<std::vector<std::string>>();
  if (meta_json) *meta_json = header.value("meta", json::object()).dump();

  for (int z = 0; z < nz; ++z) {
    Eigen::MatrixXf sl(ny, nx);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        float v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        sl(y, x) = v;
      }
    vol.slices.push_back(std::move(sl));
  }
  if (!in) throw std::runtime_error("truncated array file: " + path);
  return vol;
}

void save_label_array(const LabelVolume& vol, const std::string& path,
                      const std::string& meta_json) {
  vol.validate();
  json header;
  header["dtype"] = "int32";
  header["shape"] = {vol.depth(), static_cast<int>(vol.slices[0].rows()),
                     static_cast<int>(vol.slices[0].cols())};
  header["num_classes"] = vol.num_classes;
  header["meta"] = json::parse(meta_json.empty() ? "{}" : meta_json);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write array file: " + path);
  write_header(out, header);
  for (const auto& sl : vol.slices)
    for (Eigen::Index y = 0; y < sl.rows(); ++y)
      for (Eigen::Index x = 0; x < sl.cols(); ++x) {
        const std::int32_t v = sl(y, x);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  if (!out) throw std::runtime_error("short write on array file: " + path);
}

LabelVolume load_label_array(const std::string& path, std::string* meta_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open array file: " + path);
  const json header = read_header(in, path);
  if (header.at("dtype") != "int32")
    throw std::runtime_error("array file is not a label volume: " + path);
  const auto shape = header.at("shape");
  const int nz = shape[0], ny = shape[1], nx = shape[2];

  LabelVolume vol;
  vol.num_classes = header.at("num_classes").get<int>();
  if (meta_json) *meta_json = header.value("meta", json::object()).dump();
  for (int z = 0; z < nz; ++z) {
    LabelMat sl(ny, nx);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        std::int32_t v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        sl(y, x) = v;
      }
    vol.slices.push_back(std::move(sl));
  }
  if (!in) throw std::runtime_error("truncated array file: " + path);
  return vol;
}

}  // namespace tdaug
