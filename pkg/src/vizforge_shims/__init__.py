"""In-runtime capture harnesses for sandboxed corpus samples."""
