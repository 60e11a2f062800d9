"""kwsfcm - noisy image segmentation with weighted SUSAN kernel fuzzy c-means."""
