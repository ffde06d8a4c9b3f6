#include "ivc/annotations.h"

#include "ivc/error.h"

#include <sstream>

namespace ivc {

namespace {

RayHit cast_or_throw(const RayIndex& idx, const Ray& ray, const char* which) {
  const auto hit = idx.intersect(ray.origin, ray.direction);
  if (!hit) {
    throw Error(ErrorCode::RayMiss, std::string("ray ") + which + " does not hit the colon wall");
  }
  return *hit;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

std::string_view to_string(AnomalyClass c) {
  switch (c) {
    case AnomalyClass::Adenomatous: return "Adenomatous";
    case AnomalyClass::Serrated: return "Serrated";
    case AnomalyClass::Hyperplastic: return "Hyperplastic";
    case AnomalyClass::Inflammatory: return "Inflammatory";
    case AnomalyClass::VillousAdenoma: return "VillousAdenoma";
    case AnomalyClass::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

AnomalyClass anomaly_class_from_string(std::string_view name) {
  for (auto c : kAllAnomalyClasses) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::InvalidData, "unknown anomaly class '" + std::string(name) + "'");
}

Bookmark make_bookmark(const RayIndex& idx, const Centerline& c, const Ray& ray, AnomalyClass anomaly,
                       std::string note, int id, double created_at) {
  const RayHit hit = cast_or_throw(idx, ray, "for the bookmark");
  Bookmark b;
  b.id = id;
  b.surface_point = hit.point;
  b.s_mm = nearest_on_centerline(c, hit.point).s_mm;
  b.anomaly = anomaly;
  b.note = std::move(note);
  b.created_at = created_at;
  return b;
}

const Bookmark& Annotations::add_bookmark(const RayIndex& idx, const Centerline& c, const Ray& ray,
                                          AnomalyClass anomaly, std::string note, double created_at) {
  bookmarks_.push_back(make_bookmark(idx, c, ray, anomaly, std::move(note), next_bookmark_id_, created_at));
  ++next_bookmark_id_;
  return bookmarks_.back();
}

const Measurement& Annotations::measure(const RayIndex& idx, const Ray& a, const Ray& b) {
  measurements_.push_back(ivc::measure(idx, a, b, next_measurement_id_));
  ++next_measurement_id_;
  return measurements_.back();
}

const Measurement& Annotations::add_measurement(const Vec3& a, const Vec3& b) {
  measurements_.push_back({next_measurement_id_++, a, b, (a - b).norm()});
  return measurements_.back();
}

const Bookmark* Annotations::find_bookmark(int id) const {
  for (const auto& b : bookmarks_) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

void Annotations::restore(std::vector<Bookmark> bookmarks, std::vector<Measurement> measurements) {
  int last = 0;
  for (const auto& b : bookmarks) {
    if (b.id <= last) throw Error(ErrorCode::InvalidData, "bookmark ids must increase");
    last = b.id;
  }
  next_bookmark_id_ = last + 1;
  last = 0;
  for (const auto& m : measurements) {
    if (m.id <= last) throw Error(ErrorCode::InvalidData, "measurement ids must increase");
    last = m.id;
  }
  next_measurement_id_ = last + 1;
  bookmarks_ = std::move(bookmarks);
  measurements_ = std::move(measurements);
}

NavState goto_bookmark(NavState n, const Centerline& c, const Bookmark& b) {
  if (!(b.s_mm >= 0.0 && b.s_mm <= c.total_length())) {
    throw Error(ErrorCode::StaleBookmark, "bookmark " + std::to_string(b.id) + " lies outside this centerline");
  }
  n.s_mm = b.s_mm;
  n.head_offset_mm = Vec3::Zero();
  return n;
}

Measurement measure(const RayIndex& idx, const Ray& a, const Ray& b, int id) {
  const RayHit ha = cast_or_throw(idx, a, "a");
  const RayHit hb = cast_or_throw(idx, b, "b");
  return {id, ha.point, hb.point, (ha.point - hb.point).norm()};
}

std::string bookmarks_csv(const std::vector<Bookmark>& bookmarks) {
  std::ostringstream out;
  out.precision(17);
  out << "id,s_mm,x,y,z,class,note\n";
  for (const auto& b : bookmarks) {
    out << b.id << ',' << b.s_mm << ',' << b.surface_point.x() << ',' << b.surface_point.y() << ','
        << b.surface_point.z() << ',' << to_string(b.anomaly) << ',' << csv_field(b.note) << '\n';
  }
  return out.str();
}

std::string measurements_csv(const std::vector<Measurement>& measurements) {
  std::ostringstream out;
  out.precision(17);
  out << "id,ax,ay,az,bx,by,bz,distance_mm\n";
  for (const auto& m : measurements) {
    out << m.id << ',' << m.point_a.x() << ',' << m.point_a.y() << ',' << m.point_a.z() << ',' << m.point_b.x()
        << ',' << m.point_b.y() << ',' << m.point_b.z() << ',' << m.distance_mm << '\n';
  }
  return out.str();
}

}  // namespace ivc
