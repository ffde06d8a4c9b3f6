#pragma once

#include "ivc/error.h"
#include "ivc/phantom.h"
#include "ivc/session.h"

#include <doctest.h>

#include <functional>

namespace fixture {

inline const ivc::Phantom& straight_phantom() {
  static const ivc::Phantom p = ivc::generate_phantom(ivc::PhantomSpec::straight());
  return p;
}

inline const ivc::SessionInputs& straight_inputs() {
  static const ivc::SessionInputs in = ivc::SessionInputs::from_phantom(straight_phantom());
  return in;
}

inline ivc::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ivc::Error& e) {
    return e.code();
  }
  FAIL("expected an ivc::Error");
  return ivc::ErrorCode::InvalidData;
}

}  // namespace fixture
