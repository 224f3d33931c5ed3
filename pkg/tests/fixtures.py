"""Shared descriptor texts."""

VELOCITY_CCL = '''CCTK_CUDA_KERNEL UPDATE_VELOCITY
   TYPE=3DBLOCK
   STENCIL="1,1,1,1,1,1"
   TILE="16,16,16"
{
  CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=SEPARATEINOUT 
  {
    vx, vy, vz
  } "VELOCITY"
  CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=IN
  {
    p
  } "PRESSURE"
  CCTK_CUDA_KERNEL_PARAMETER
  {
    density
  } "DENSITY"
}
'''

# same kernel, different layout and comments
VELOCITY_CCL_REFORMATTED = '''# velocity update
CCTK_CUDA_KERNEL UPDATE_VELOCITY TYPE = 3DBLOCK STENCIL = "1,1,1,1,1,1" TILE="16,16,16" {
    CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=SEPARATEINOUT {vx,vy ,vz} "VELOCITY"
    # pressure is read only
    CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=IN {p} "PRESSURE"
    CCTK_CUDA_KERNEL_PARAMETER { density } "DENSITY"
}
'''

DIFFUSION = '''CCTK_CUDA_KERNEL DIFFUSE
   TYPE=3DBLOCK
   STENCIL="1,1,1,1,1,1"
   TILE="8,8,8"
{
  CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=SEPARATEINOUT
  {
    u
  } "FIELD"
  CCTK_CUDA_KERNEL_PARAMETER
  {
    kappa
  } "RATE"
}
'''
