"""Joint event denoising and contrast-maximization motion estimation."""
