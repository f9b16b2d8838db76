#pragma once

namespace strata {

/// Entry point behind the binary. Exit codes: 0 success, 1 tool failure,
/// 2 usage error, 3 obscure image (detect only).
int cli_main(int argc, const char* const* argv);

}  // namespace strata
