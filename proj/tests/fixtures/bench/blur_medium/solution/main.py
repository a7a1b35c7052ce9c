from PIL import Image, ImageFilter

image = Image.open("photo.png").convert("RGB")
image.filter(ImageFilter.BoxBlur(2)).save("blurred.png")
