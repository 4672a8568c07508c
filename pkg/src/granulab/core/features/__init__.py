"""Summary statistics of depth images of grain formations."""
