#include "ivc/centerline.h"
#include "ivc/distance_transform.h"
#include "ivc/phantom.h"
#include "ivc/server.h"
#include "ivc/session.h"
#include "ivc/simulation.h"
#include "ivc/surface.h"
#include "ivc/volume.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using ivc::Vec3;

Vec3 parse_point(const std::string& text) {
  Vec3 p;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> p.x() >> c1 >> p.y() >> c2 >> p.z()) || c1 != ',' || c2 != ',') {
    throw CLI::ValidationError("point", "expected x,y,z but got '" + text + "'");
  }
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ivc::Error(ivc::ErrorCode::IoFailure, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ivc::Error(ivc::ErrorCode::IoFailure, "cannot write " + path);
  out << text;
}

// Phantom directory if given, else the default three-polyp S-curve.
ivc::Phantom load_or_generate(const std::string& data_dir) {
  if (!data_dir.empty()) return ivc::load_phantom(data_dir);
  ivc::PhantomSpec spec = ivc::PhantomSpec::s_curve();
  spec.polyps = ivc::screening_polyps();
  return ivc::generate_phantom(spec);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Immersive virtual colonoscopy engine"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Segment the lumen of a CT volume");
  std::string ingest_header, ingest_seed, ingest_out, ingest_mesh;
  double threshold = ivc::kDefaultAirThresholdHu;
  ingest->add_option("header", ingest_header, "Volume header JSON")->required();
  ingest->add_option("--seed", ingest_seed, "Seed point x,y,z in mm")->required();
  ingest->add_option("--threshold", threshold, "Air threshold in HU");
  ingest->add_option("--out", ingest_out, "Mask header to write");
  ingest->add_option("--mesh", ingest_mesh, "Wall mesh OBJ to write");

  auto* centerline = app.add_subcommand("centerline", "Extract the mid-line of a lumen mask");
  std::string cl_mask, cl_start, cl_end, cl_out;
  centerline->add_option("mask", cl_mask, "Mask header JSON")->required();
  centerline->add_option("--start", cl_start, "Start seed x,y,z in mm")->required();
  centerline->add_option("--end", cl_end, "End seed x,y,z in mm")->required();
  centerline->add_option("--out", cl_out, "CSV output (stdout by default)");

  auto* simulate = app.add_subcommand("simulate", "Run a scripted reading protocol");
  std::string protocol = "one_run", gaze = "forward", report_path, sim_data, sim_log;
  int level = 2;
  simulate->add_option("--protocol", protocol, "one_run or two_run")
      ->check(CLI::IsMember({"one_run", "two_run"}));
  simulate->add_option("--level", level, "Velocity level 1-4")->check(CLI::Range(1, 4));
  simulate->add_option("--gaze", gaze, "forward or sweep")->check(CLI::IsMember({"forward", "sweep"}));
  simulate->add_option("--report", report_path, "Metrics JSON (stdout by default)");
  simulate->add_option("--data", sim_data, "Phantom directory");
  simulate->add_option("--log", sim_log, "Session log (JSON Lines) to write");

  auto* replay = app.add_subcommand("replay", "Replay a session log");
  std::string replay_log, replay_data;
  replay->add_option("log", replay_log, "Session log")->required();
  replay->add_option("--data", replay_data, "Phantom directory");

  auto* serve = app.add_subcommand("serve", "Serve one viewer connection");
  int port = 7272;
  std::string serve_data, serve_log, bind = "127.0.0.1";
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--data", serve_data, "Phantom directory");
  serve->add_option("--log", serve_log, "Session log to write on disconnect");

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic colon phantom");
  std::string preset = "s_curve", polyps_path, phantom_out;
  phantom->add_option("--preset", preset, "straight or s_curve")->check(CLI::IsMember({"straight", "s_curve"}));
  phantom->add_option("--polyps", polyps_path, "Polyp list JSON");
  phantom->add_option("--out", phantom_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const ivc::Volume vol = ivc::load_volume(ingest_header);
      const ivc::LumenMask mask = ivc::segment_lumen(vol, parse_point(ingest_seed), threshold);
      std::filesystem::path out = ingest_out;
      if (out.empty()) {
        out = std::filesystem::path(ingest_header);
        out.replace_filename(out.stem().string() + "_mask.json");
      }
      ivc::write_mask(mask, out);
      nlohmann::json summary{{"mask", out.string()}, {"lumen_voxels", mask.count()}};
      if (!ingest_mesh.empty()) {
        const ivc::Mesh mesh = ivc::extract_isosurface(mask, vol);
        ivc::write_obj(mesh, ingest_mesh);
        summary["mesh"] = ingest_mesh;
        summary["triangles"] = mesh.triangles.size();
        summary["surface_area_mm2"] = ivc::surface_area(mesh);
      }
      std::cout << summary.dump(2) << "\n";
    } else if (*centerline) {
      const ivc::LumenMask mask = ivc::load_mask(cl_mask);
      const ivc::DistanceField df = ivc::distance_transform(mask);
      const ivc::Centerline c = ivc::extract_centerline(mask, df, parse_point(cl_start), parse_point(cl_end));
      write_text(cl_out, ivc::to_csv(c));
    } else if (*simulate) {
      const ivc::Phantom ph = load_or_generate(sim_data);
      const ivc::SessionInputs inputs = ivc::SessionInputs::from_phantom(ph);
      const ivc::ProtocolRun run =
          ivc::simulate_protocol(inputs, ivc::run_script_from_string(protocol), level,
                                 ivc::gaze_mode_from_string(gaze), ph.polyps);
      if (!sim_log.empty()) write_text(sim_log, ivc::to_jsonl(run.log));
      write_text(report_path, run.report.to_json() + "\n");
    } else if (*replay) {
      const ivc::Phantom ph = load_or_generate(replay_data);
      const ivc::SessionInputs inputs = ivc::SessionInputs::from_phantom(ph);
      const ivc::ReplayResult r = ivc::replay(read_file(replay_log), inputs);
      char hash[19];
      std::snprintf(hash, sizeof hash, "0x%016llx", static_cast<unsigned long long>(r.hash));
      nlohmann::json out{{"t", r.state.time()},
                         {"s_mm", r.state.nav.s_mm},
                         {"visited_fraction", r.state.centerline.visited_fraction()},
                         {"coverage_fraction", ivc::coverage_fraction(r.state.coverage, inputs.config.tau_s)},
                         {"bookmarks", r.state.annotations.bookmarks().size()},
                         {"measurements", r.state.annotations.measurements().size()},
                         {"state_hash", hash}};
      std::cout << out.dump(2) << "\n";
    } else if (*serve) {
      const ivc::Phantom ph = load_or_generate(serve_data);
      const ivc::SessionInputs inputs = ivc::SessionInputs::from_phantom(ph);
      ivc::ServeOptions opts;
      opts.bind_address = bind;
      opts.port = port;
      if (!serve_log.empty()) opts.log_path = serve_log;
      opts.on_listening = [](int p) { std::cerr << "listening on port " << p << std::endl; };
      const ivc::ServeResult r = ivc::serve(inputs, opts);
      std::cerr << "session ended after " << r.ticks << " ticks";
      if (r.protocol_error) std::cerr << " (" << *r.protocol_error << ")";
      std::cerr << "\n";
    } else if (*phantom) {
      ivc::PhantomSpec spec = ivc::PhantomSpec::straight();
      if (ivc::phantom_preset_from_string(preset) == ivc::PhantomPreset::SCurve) spec = ivc::PhantomSpec::s_curve();
      if (!polyps_path.empty()) spec = ivc::phantom_spec_from_json(read_file(polyps_path), spec);
      const ivc::Phantom ph = ivc::generate_phantom(spec);
      ivc::write_phantom(ph, phantom_out);
      std::cout << "wrote " << phantom_out << " (" << ph.polyps.size() << " polyps)\n";
    }
  } catch (const ivc::Error& e) {
    std::cerr << "ivc: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ivc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
