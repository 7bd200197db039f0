"""Acceptance harness: multi-seed separation runs, gradient checks and flow checks."""
