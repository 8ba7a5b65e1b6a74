#pragma once

namespace idem {

// Entry point behind the `idem` binary. Exit codes: 0 success, 1 usage or
// configuration error, 2 runtime failure.
int cli_main(int argc, const char* const* argv);

} // namespace idem
