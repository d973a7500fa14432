#include "rmpc/trajlog.hpp"

#include <cstring>
#include <fstream>

namespace rmpc {

namespace {
constexpr char kLogMagic[8] = {'R', 'M', 'P', 'C', 'L', 'G', '0', '1'};
constexpr uint32_t kLogVersion = 1;
}  // namespace

TrajLogWriter::TrajLogWriter(const std::string& path) {
  auto* os = new std::ofstream(path, std::ios::binary);
  if (!*os) {
    delete os;
    throw StructuralError("TrajLogWriter: cannot open " + path);
  }
  os->write(kLogMagic, sizeof(kLogMagic));
  os->write(reinterpret_cast<const char*>(&kLogVersion), sizeof(kLogVersion));
  const uint32_t rec_size = sizeof(LogRecord);
  os->write(reinterpret_cast<const char*>(&rec_size), sizeof(rec_size));
  os_ = os;
}

TrajLogWriter::~TrajLogWriter() { close(); }

void TrajLogWriter::append(const LogRecord& rec) {
  if (!os_) throw StructuralError("TrajLogWriter: writer is closed");
  static_cast<std::ofstream*>(os_)->write(reinterpret_cast<const char*>(&rec), sizeof(rec));
}

void TrajLogWriter::close() {
  if (os_) {
    delete static_cast<std::ofstream*>(os_);
    os_ = nullptr;
  }
}

std::vector<LogRecord> read_traj_log(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StructuralError("read_traj_log: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (std::memcmp(magic, kLogMagic, sizeof(magic)) != 0)
    throw StructuralError("read_traj_log: bad magic in " + path);
  uint32_t version = 0, rec_size = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  is.read(reinterpret_cast<char*>(&rec_size), sizeof(rec_size));
  if (version != kLogVersion || rec_size != sizeof(LogRecord))
    throw StructuralError("read_traj_log: unsupported version or record size");
  std::vector<LogRecord> out;
  LogRecord rec;
  while (is.read(reinterpret_cast<char*>(&rec), sizeof(rec))) out.push_back(rec);
  return out;
}

void export_traj_csv(const std::string& csv_path, const std::vector<LogRecord>& records) {
  std::ofstream os(csv_path);
  if (!os) throw StructuralError("export_traj_csv: cannot open " + csv_path);
  os << "time";
  for (int i = 0; i < kNq; ++i) os << ",q" << i;
  for (int i = 0; i < kNq; ++i) os << ",qd" << i;
  for (int i = 0; i < kNumJoints; ++i) os << ",tau_mpc" << i;
  for (int i = 0; i < kNumJoints; ++i) os << ",tau_res" << i;
  for (int i = 0; i < kContactDim; ++i) os << ",f" << i;
  os << ",phase,v_mpc,reward_total";
  static const char* term_names[10] = {"lin_vel",     "ang_vel",   "action_rate1",
                                       "action_rate2", "torques",  "orientation",
                                       "height",       "joint_reg", "self_collision",
                                       "termination"};
  for (const char* n : term_names) os << ",r_" << n;
  os << ",flags\n";
  os.precision(12);
  for (const auto& r : records) {
    os << r.time;
    for (double v : r.q) os << "," << v;
    for (double v : r.qd) os << "," << v;
    for (double v : r.tau_mpc) os << "," << v;
    for (double v : r.tau_res) os << "," << v;
    for (double v : r.f_contact) os << "," << v;
    os << "," << r.phase << "," << r.v_mpc << "," << r.reward_total;
    for (double v : r.reward_terms) os << "," << v;
    os << "," << r.flags << "\n";
  }
}

}  // namespace rmpc
