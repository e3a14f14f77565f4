#include "glagan/nifti.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

namespace glagan {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;     // must be 348
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t DT_UINT8 = 2;
constexpr int16_t DT_INT16 = 4;
constexpr int16_t DT_INT32 = 8;
constexpr int16_t DT_FLOAT32 = 16;
constexpr int16_t DT_FLOAT64 = 64;

template <typename T>
T bswap(T v) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

void swap_header(Nifti1Header& h) {
  h.sizeof_hdr = bswap(h.sizeof_hdr);
  for (auto& d : h.dim) d = bswap(d);
  h.datatype = bswap(h.datatype);
  h.bitpix = bswap(h.bitpix);
  for (auto& p : h.pixdim) p = bswap(p);
  h.vox_offset = bswap(h.vox_offset);
  h.scl_slope = bswap(h.scl_slope);
  h.scl_inter = bswap(h.scl_inter);
}

struct GzFile {
  gzFile f = nullptr;
  explicit GzFile(const std::string& path, const char* mode) { f = gzopen(path.c_str(), mode); }
  ~GzFile() {
    if (f) gzclose(f);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
};

void read_exact(gzFile f, void* dst, size_t n, const std::string& path) {
  if (gzread(f, dst, static_cast<unsigned>(n)) != static_cast<int>(n))
    throw io_error("truncated NIfTI file: " + path);
}

template <typename Src>
void convert_payload(const std::vector<char>& raw, std::vector<float>& out, bool swapped,
                     float slope, float inter) {
  const Src* src = reinterpret_cast<const Src*>(raw.data());
  size_t n = out.size();
  for (size_t i = 0; i < n; ++i) {
    Src v = swapped ? bswap(src[i]) : src[i];
    out[i] = static_cast<float>(v) * slope + inter;
  }
}

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

Volume load_volume(const std::string& path) {
  if (!std::filesystem::exists(path)) throw io_error("no such file: " + path);
  GzFile gz(path, "rb");
  if (!gz.f) throw io_error("cannot open: " + path);

  Nifti1Header h{};
  read_exact(gz.f, &h, sizeof(h), path);

  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    if (bswap(h.sizeof_hdr) == 348) {
      swapped = true;
      swap_header(h);
    } else {
      throw io_error("malformed NIfTI header (bad sizeof_hdr): " + path);
    }
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
    throw io_error("malformed NIfTI header (bad magic): " + path);
  if (h.dim[0] < 1 || h.dim[0] > 7)
    throw io_error("malformed NIfTI header (bad dim[0]): " + path);
  for (int a = h.dim[0] + 1; a <= 7; ++a)
    if (h.dim[a] == 0) h.dim[a] = 1;
  if (h.dim[0] > 3)
    for (int a = 4; a <= h.dim[0]; ++a)
      if (h.dim[a] > 1) throw io_error("non-3D payload: " + path);
  if (h.dim[0] < 3 || h.dim[1] < 1 || h.dim[2] < 1 || h.dim[3] < 1)
    throw io_error("non-3D payload: " + path);

  Volume v(h.dim[1], h.dim[2], h.dim[3]);
  v.spacing = {h.pixdim[1], h.pixdim[2], h.pixdim[3]};

  int bytes_per;
  switch (h.datatype) {
    case DT_UINT8: bytes_per = 1; break;
    case DT_INT16: bytes_per = 2; break;
    case DT_INT32: bytes_per = 4; break;
    case DT_FLOAT32: bytes_per = 4; break;
    case DT_FLOAT64: bytes_per = 8; break;
    default:
      throw io_error("unsupported NIfTI datatype " + std::to_string(h.datatype) + ": " + path);
  }

  long skip = static_cast<long>(h.vox_offset) - static_cast<long>(sizeof(h));
  if (skip < 0) throw io_error("malformed NIfTI header (vox_offset < 348): " + path);
  if (skip > 0) {
    std::vector<char> junk(static_cast<size_t>(skip));
    read_exact(gz.f, junk.data(), junk.size(), path);
  }

  std::vector<char> raw(static_cast<size_t>(v.numel()) * bytes_per);
  read_exact(gz.f, raw.data(), raw.size(), path);

  float slope = (h.scl_slope == 0.f || !std::isfinite(h.scl_slope)) ? 1.f : h.scl_slope;
  float inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.f;
  if (slope == 1.f && h.scl_slope == 0.f) inter = 0.f;

  switch (h.datatype) {
    case DT_UINT8: convert_payload<uint8_t>(raw, v.data, swapped, slope, inter); break;
    case DT_INT16: convert_payload<int16_t>(raw, v.data, swapped, slope, inter); break;
    case DT_INT32: convert_payload<int32_t>(raw, v.data, swapped, slope, inter); break;
    case DT_FLOAT32: convert_payload<float>(raw, v.data, swapped, slope, inter); break;
    case DT_FLOAT64: convert_payload<double>(raw, v.data, swapped, slope, inter); break;
  }
  return v;
}

void save_volume(const Volume& v, const std::string& path, bool as_int16) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::exists(parent))
    throw io_error("parent directory does not exist: " + parent.string());

  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<int16_t>(v.shape[0]);
  h.dim[2] = static_cast<int16_t>(v.shape[1]);
  h.dim[3] = static_cast<int16_t>(v.shape[2]);
  for (int a = 4; a <= 7; ++a) h.dim[a] = 1;
  h.datatype = as_int16 ? DT_INT16 : DT_FLOAT32;
  h.bitpix = as_int16 ? 16 : 32;
  h.pixdim[0] = 1.f;
  h.pixdim[1] = v.spacing[0];
  h.pixdim[2] = v.spacing[1];
  h.pixdim[3] = v.spacing[2];
  h.vox_offset = 352.f;
  h.scl_slope = 1.f;
  h.scl_inter = 0.f;
  std::memcpy(h.magic, "n+1", 4);

  // "wbT" writes a plain uncompressed file through the same gz handle.
  const char* mode = has_suffix(path, ".gz") ? "wb6" : "wbT";
  GzFile gz(path, mode);
  if (!gz.f) throw io_error("cannot open for writing: " + path);

  char pad[4] = {0, 0, 0, 0};
  if (gzwrite(gz.f, &h, sizeof(h)) != static_cast<int>(sizeof(h)) ||
      gzwrite(gz.f, pad, 4) != 4)
    throw io_error("write failed: " + path);

  if (as_int16) {
    std::vector<int16_t> buf(v.data.size());
    for (size_t i = 0; i < v.data.size(); ++i) buf[i] = static_cast<int16_t>(std::lround(v.data[i]));
    unsigned nbytes = static_cast<unsigned>(buf.size() * sizeof(int16_t));
    if (gzwrite(gz.f, buf.data(), nbytes) != static_cast<int>(nbytes))
      throw io_error("write failed: " + path);
  } else {
    unsigned nbytes = static_cast<unsigned>(v.data.size() * sizeof(float));
    if (gzwrite(gz.f, v.data.data(), nbytes) != static_cast<int>(nbytes))
      throw io_error("write failed: " + path);
  }
}

}  // namespace glagan
