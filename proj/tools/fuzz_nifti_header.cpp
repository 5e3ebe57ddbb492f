// libFuzzer entry point for the NIfTI decoder. Build with clang and
// -DBRAINNET_BUILD_FUZZER=ON, then run ./fuzz_nifti_header -max_total_time=600.

#include <cstddef>
#include <cstdint>
#include <span>

#include "brainnet/nifti.hpp"

extern "C" int LLVMFuzzerTestOneInput(const std::uint8_t* data, std::size_t size) {
  const auto bytes = std::as_bytes(std::span(data, size));
  try {
    (void)brainnet::nifti::parse_header(bytes, size);
    (void)brainnet::nifti::decode<float>(bytes);
  } catch (const brainnet::Error&) {
  }
  return 0;
}
