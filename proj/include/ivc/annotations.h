#pragma once

#include "ivc/centerline.h"
#include "ivc/navigation.h"
#include "ivc/ray_index.h"
#include "ivc/types.h"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace ivc {

enum class AnomalyClass { Adenomatous, Serrated, Hyperplastic, Inflammatory, VillousAdenoma, Unclassified };

inline constexpr std::array<AnomalyClass, 6> kAllAnomalyClasses = {
    AnomalyClass::Adenomatous,  AnomalyClass::Serrated,       AnomalyClass::Hyperplastic,
    AnomalyClass::Inflammatory, AnomalyClass::VillousAdenoma, AnomalyClass::Unclassified};

std::string_view to_string(AnomalyClass c);
AnomalyClass anomaly_class_from_string(std::string_view name);

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
};

struct Bookmark {
  int id = 0;
  Vec3 surface_point = Vec3::Zero();
  double s_mm = 0.0;
  AnomalyClass anomaly = AnomalyClass::Unclassified;
  std::string note;
  double created_at = 0.0;
};

struct Measurement {
  int id = 0;
  Vec3 point_a = Vec3::Zero();
  Vec3 point_b = Vec3::Zero();
  double distance_mm = 0.0;
};

/// Append-only bookmark and measurement lists with strictly increasing ids.
class Annotations {
 public:
  /// RayMiss when the pointing ray does not reach the wall.
  const Bookmark& add_bookmark(const RayIndex& idx, const Centerline& c, const Ray& ray, AnomalyClass anomaly,
                               std::string note, double created_at = 0.0);
  /// RayMiss naming the ray ("a" or "b") that missed.
  const Measurement& measure(const RayIndex& idx, const Ray& a, const Ray& b);
  const Measurement& add_measurement(const Vec3& a, const Vec3& b);

  const std::vector<Bookmark>& bookmarks() const { return bookmarks_; }
  const std::vector<Measurement>& measurements() const { return measurements_; }
  const Bookmark* find_bookmark(int id) const;

  /// Restores persisted entries; ids must keep increasing.
  void restore(std::vector<Bookmark> bookmarks, std::vector<Measurement> measurements);

 private:
  std::vector<Bookmark> bookmarks_;
  std::vector<Measurement> measurements_;
  int next_bookmark_id_ = 1;
  int next_measurement_id_ = 1;
};

Bookmark make_bookmark(const RayIndex& idx, const Centerline& c, const Ray& ray, AnomalyClass anomaly,
                       std::string note, int id, double created_at);

/// Lands on the bookmark's mid-line station; StaleBookmark if it lies
/// outside this centerline.
NavState goto_bookmark(NavState n, const Centerline& c, const Bookmark& b);

/// Straight-line distance between the two wall hits.
Measurement measure(const RayIndex& idx, const Ray& a, const Ray& b, int id = 0);

std::string bookmarks_csv(const std::vector<Bookmark>& bookmarks);
std::string measurements_csv(const std::vector<Measurement>& measurements);

}  // namespace ivc
