"""Models tests package."""
