#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "shift/harness.hpp"

namespace shift::harness {

namespace {

constexpr const char* kLogMagic = "shiftlab-trajlog";
constexpr const char* kFramesMagic = "shiftlab-frames";
constexpr int kVersion = 1;

// one token per StepRecord field, order fixed by the v1 schema
constexpr const char* kFields =
    "t true_state frame action clean_action reward attacked omega w1_adj w1_prev_true recon "
    "ssim realism semchg aligned l2_true faith";

}  // namespace

void save_log(const TrajectoryLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write log: " + path);
  out << kLogMagic << " v" << kVersion << "\n";
  out << "config " << hash_hex(log.config) << "\n";
  out << "attack " << log.attack << "\n";
  out << "defense " << log.defense << "\n";
  out << "seed " << log.seed << "\n";
  out << "episode " << log.episode << "\n";
  out << "frame_size " << log.frame_size << "\n";
  out << "fields " << kFields << "\n";
  out << "steps " << log.steps.size() << "\n";
  char buf[512];
  for (const auto& r : log.steps) {
    std::snprintf(buf, sizeof buf,
                  "%d %d %d %d %d %.17g %d %.17g %.17g %.17g %.17g %.17g %.17g %d %d %.17g %.17g\n",
                  r.t, r.true_state, r.observed_frame, r.action, r.clean_action, r.reward,
                  r.attacked ? 1 : 0, r.omega, r.w1_adjacent, r.w1_vs_prev_true, r.recon,
                  r.ssim_vs_true, r.realism, r.semantics_changed ? 1 : 0, r.history_aligned ? 1 : 0,
                  r.l2_vs_true, r.faith);
    out << buf;
  }
  if (!out) throw IoError("short write: " + path);

  std::ofstream fout(path + ".frames", std::ios::binary);
  if (!fout) throw IoError("cannot write frame sidecar: " + path + ".frames");
  fout << kFramesMagic << " v" << kVersion << "\n";
  fout << "count " << log.frames.size() << " size " << log.frame_size << "\n";
  const int fs = log.frame_size;
  std::vector<double> row(static_cast<std::size_t>(fs) * fs);
  for (const auto& f : log.frames) {
    if (f.rows() != fs || f.cols() != fs) throw ShapeError("frame does not match frame_size");
    for (int i = 0; i < fs; ++i)
      for (int j = 0; j < fs; ++j) row[static_cast<std::size_t>(i) * fs + j] = f(i, j);
    fout.write(reinterpret_cast<const char*>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!fout) throw IoError("short write: " + path + ".frames");
}

TrajectoryLog load_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read log: " + path);
  std::string magic, ver;
  if (!(in >> magic >> ver) || magic != kLogMagic)
    throw FormatError("not a trajectory log: " + path);
  if (ver != "v" + std::to_string(kVersion))
    throw FormatError("unsupported log version " + ver + " in " + path);

  TrajectoryLog log;
  std::string key;
  long long nsteps = -1;
  while (in >> key) {
    if (key == "config") {
      std::string hex;
      in >> hex;
      log.config = std::strtoull(hex.c_str(), nullptr, 16);
    } else if (key == "attack") {
      in >> log.attack;
    } else if (key == "defense") {
      in >> log.defense;
    } else if (key == "seed") {
      in >> log.seed;
    } else if (key == "episode") {
      in >> log.episode;
    } else if (key == "frame_size") {
      in >> log.frame_size;
    } else if (key == "fields") {
      std::string line;
      std::getline(in, line);
      if (line != std::string(" ") + kFields)
        throw FormatError("unexpected field list in " + path);
    } else if (key == "steps") {
      in >> nsteps;
      break;
    } else {
      throw FormatError("unexpected header key '" + key + "' in " + path);
    }
  }
  if (nsteps < 0) throw FormatError("missing steps header in " + path);

  for (long long i = 0; i < nsteps; ++i) {
    StepRecord r;
    int attacked = 0, semchg = 0, aligned = 0;
    if (!(in >> r.t >> r.true_state >> r.observed_frame >> r.action >> r.clean_action >>
          r.reward >> attacked >> r.omega >> r.w1_adjacent >> r.w1_vs_prev_true >> r.recon >>
          r.ssim_vs_true >> r.realism >> semchg >> aligned >> r.l2_vs_true >> r.faith))
      throw FormatError("truncated log: " + path);
    r.attacked = attacked != 0;
    r.semantics_changed = semchg != 0;
    r.history_aligned = aligned != 0;
    log.steps.push_back(r);
  }

  std::ifstream fin(path + ".frames", std::ios::binary);
  if (!fin) throw IoError("cannot read frame sidecar: " + path + ".frames");
  std::string fmagic, fver, ckey, skey;
  long long count = 0;
  int fs = 0;
  if (!(fin >> fmagic >> fver) || fmagic != kFramesMagic)
    throw FormatError("not a frame sidecar: " + path + ".frames");
  if (fver != "v" + std::to_string(kVersion))
    throw FormatError("unsupported sidecar version " + fver);
  if (!(fin >> ckey >> count >> skey >> fs) || ckey != "count" || skey != "size")
    throw FormatError("malformed sidecar header: " + path + ".frames");
  fin.get();  // newline before the packed payload
  if (fs != log.frame_size) throw FormatError("sidecar frame size mismatch: " + path);

  std::vector<double> row(static_cast<std::size_t>(fs) * fs);
  for (long long i = 0; i < count; ++i) {
    fin.read(reinterpret_cast<char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!fin) throw FormatError("truncated frame sidecar: " + path + ".frames");
    env::Frame f(fs, fs);
    for (int a = 0; a < fs; ++a)
      for (int b = 0; b < fs; ++b) f(a, b) = row[static_cast<std::size_t>(a) * fs + b];
    log.frames.push_back(std::move(f));
  }
  return log;
}

}  // namespace shift::harness
