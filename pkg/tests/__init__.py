"""Root level tests package."""
