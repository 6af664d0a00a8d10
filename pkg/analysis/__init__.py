"""Analysis modules for subharmonic oscillation in PWM DC-DC converters."""
